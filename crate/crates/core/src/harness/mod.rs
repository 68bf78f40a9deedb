//! Runs a subject command as a child process and samples its CPU and memory
//! use, producing [`ProcessStats`] evidence.
//!
//! Each sample's CPU percentage is `100 * Δcpu_time / Δwall_time` since the
//! previous sample, relative to one core. The child runs in its own process
//! group so a timeout or interrupt can take down anything it spawned.
//!
//! Compute cost (`TrainingComputeCost`) is `cpu_avg_percent / 100 *
//! wall_time_s` core-seconds, see [`ProcessStats::core_seconds`]. Inference
//! latency (`InferenceLatencyCost`) is the `wall_time_s` of a measured
//! inference command.

mod probe;

use std::io;
use std::process::{Command, ExitStatus};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{mpsc, Arc};
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::artifact;
pub use crate::evidence::ProcessStats;
use crate::evidence::{EvidenceError, Payload, Value, ValueKind};

/// Measurement type recorded on harness values.
pub const MEASUREMENT_TYPE: &str = "ProcessCPUUtilization";
/// Suffix appended to the measurement type where the platform offers no
/// process inspection and CPU and memory read as zero.
pub const UNSAMPLED_SUFFIX: &str = "+unsampled";
/// Environment variable carrying the run identifier into the child.
pub const RUN_ID_ENV: &str = "MLTE_RUN_ID";
pub const DEFAULT_INTERVAL_MS: u64 = 100;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("no command given")]
    EmptyCommand,
    #[error("sampling interval must be positive")]
    InvalidInterval,
    #[error(transparent)]
    InvalidIdentifier(#[from] EvidenceError),
    #[error("failed to start {program:?}: {source}")]
    SpawnFailure { program: String, source: io::Error },
    #[error("child {pid} exceeded the {}s timeout and was killed", .after.as_secs_f64())]
    Timeout { pid: u32, after: Duration },
    #[error("measurement interrupted; child {pid} was killed")]
    Interrupted { pid: u32 },
    #[error("lost track of child {pid}: {detail}")]
    Lost { pid: u32, detail: String },
}

impl ProcessStats {
    /// CPU time in core-seconds, `cpu_avg_percent / 100 * wall_time_s`.
    pub fn core_seconds(&self) -> f64 {
        self.cpu_avg_percent / 100.0 * self.wall_time_s
    }
}

/// One observation of the running child.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    /// Milliseconds since the child was spawned.
    pub at_ms: f64,
    pub cpu_percent: f64,
    pub resident_memory_kib: u64,
}

/// Aggregates samples into stats: min/avg/max CPU and peak memory.
///
/// An empty sample list yields zero CPU figures and `sample_count` 0.
pub fn summarize(
    samples: &[Sample],
    exit_code: i64,
    wall_time_s: f64,
    interval_ms: u64,
) -> ProcessStats {
    let n = samples.len();
    let (mut min, mut max, mut sum) = (f64::INFINITY, f64::NEG_INFINITY, 0.0);
    let mut peak = 0;
    for s in samples {
        min = min.min(s.cpu_percent);
        max = max.max(s.cpu_percent);
        sum += s.cpu_percent;
        peak = peak.max(s.resident_memory_kib);
    }
    let (min, avg, max) = if n == 0 {
        (0.0, 0.0, 0.0)
    } else {
        // Clamped: rounding in the sum can push the mean a ulp outside.
        (min, (sum / n as f64).clamp(min, max), max)
    };
    ProcessStats {
        cpu_avg_percent: avg,
        cpu_min_percent: min,
        cpu_max_percent: max,
        peak_memory_kib: peak,
        wall_time_s,
        exit_code,
        sample_count: n as u64,
        sampling_interval_ms: interval_ms,
    }
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub sampling_interval_ms: u64,
    pub timeout: Option<Duration>,
    /// When set to true by another thread the child's process group is
    /// killed and the run ends with [`HarnessError::Interrupted`].
    pub cancel: Option<Arc<AtomicBool>>,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            sampling_interval_ms: DEFAULT_INTERVAL_MS,
            timeout: None,
            cancel: None,
        }
    }
}

impl RunOptions {
    pub fn with_interval_ms(mut self, ms: u64) -> Self {
        self.sampling_interval_ms = ms;
        self
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = Some(timeout);
        self
    }

    pub fn with_cancel(mut self, flag: Arc<AtomicBool>) -> Self {
        self.cancel = Some(flag);
        self
    }
}

type Exit = (io::Result<ExitStatus>, Instant);

/// Owns the waiter thread. Dropping it before the child has been reaped
/// kills the child's process group and waits for the reap.
struct Reaper {
    pid: u32,
    exits: mpsc::Receiver<Exit>,
    waiter: Option<JoinHandle<()>>,
    reaped: bool,
}

impl Reaper {
    fn kill(&self) {
        kill_group(self.pid);
    }

    /// Blocks until the waiter reports the exit.
    fn wait(&mut self) -> Option<Exit> {
        let exit = self.exits.recv().ok();
        self.finish();
        exit
    }

    fn finish(&mut self) {
        self.reaped = true;
        if let Some(w) = self.waiter.take() {
            let _ = w.join();
        }
    }
}

impl Drop for Reaper {
    fn drop(&mut self) {
        if !self.reaped {
            self.kill();
            let _ = self.exits.recv();
            self.finish();
        }
    }
}

#[cfg(unix)]
fn kill_group(pid: u32) {
    // SAFETY: plain signal delivery. The group id equals the child's pid
    // because the child was spawned with process_group(0), and the child is
    // not reaped yet, so the id cannot have been reused.
    unsafe {
        libc::kill(-(pid as libc::pid_t), libc::SIGKILL);
    }
}

#[cfg(not(unix))]
fn kill_group(_pid: u32) {}

fn exit_code(status: ExitStatus) -> i64 {
    if let Some(code) = status.code() {
        return code as i64;
    }
    #[cfg(unix)]
    {
        use std::os::unix::process::ExitStatusExt;
        if let Some(signal) = status.signal() {
            return 128 + signal as i64;
        }
    }
    -1
}

/// Spawns `command`, samples it every `options.sampling_interval_ms` until it
/// exits and returns a process-stats [`Value`] named `identifier`.
///
/// A nonzero exit is recorded in `exit_code`, not reported as an error. On
/// timeout or cancellation the child's process group is killed and reaped
/// and the partial stats are discarded.
pub fn run_measured(
    identifier: &str,
    command: &[String],
    options: &RunOptions,
) -> Result<Value, HarnessError> {
    if identifier.is_empty() {
        return Err(EvidenceError::EmptyIdentifier.into());
    }
    artifact::validate_identifier(identifier).map_err(EvidenceError::from)?;
    let (program, args) = command.split_first().ok_or(HarnessError::EmptyCommand)?;
    if options.sampling_interval_ms == 0 {
        return Err(HarnessError::InvalidInterval);
    }
    let interval = Duration::from_millis(options.sampling_interval_ms);

    let mut cmd = Command::new(program);
    cmd.args(args).env(RUN_ID_ENV, identifier);
    #[cfg(unix)]
    {
        use std::os::unix::process::CommandExt;
        cmd.process_group(0);
    }
    let mut child = cmd.spawn().map_err(|source| HarnessError::SpawnFailure {
        program: program.clone(),
        source,
    })?;
    let started = Instant::now();
    let pid = child.id();
    let (tx, rx) = mpsc::channel();
    let waiter = thread::Builder::new()
        .name(format!("wait-{pid}"))
        .spawn(move || {
            let status = child.wait();
            let _ = tx.send((status, Instant::now()));
        });
    let waiter = match waiter {
        Ok(w) => w,
        Err(e) => {
            kill_group(pid);
            return Err(HarnessError::Lost {
                pid,
                detail: e.to_string(),
            });
        }
    };
    let mut reaper = Reaper {
        pid,
        exits: rx,
        waiter: Some(waiter),
        reaped: false,
    };
    tracing::debug!(pid, identifier, "spawned measured child");

    let timeout_at = options.timeout.map(|t| started + t);
    let mut samples = Vec::new();
    let mut peak_hwm = 0;
    let mut prev_cpu = Duration::ZERO;
    let mut prev_at = started;
    let mut tick: u32 = 1;

    let (status, ended) = loop {
        let next_sample = started + interval * tick;
        let wake = timeout_at.map_or(next_sample, |t| t.min(next_sample));
        match reaper
            .exits
            .recv_timeout(wake.saturating_duration_since(Instant::now()))
        {
            Ok(exit) => {
                reaper.finish();
                break exit;
            }
            Err(mpsc::RecvTimeoutError::Disconnected) => {
                reaper.finish();
                return Err(HarnessError::Lost {
                    pid,
                    detail: "waiter thread exited without a status".into(),
                });
            }
            Err(mpsc::RecvTimeoutError::Timeout) => {}
        }

        if options
            .cancel
            .as_ref()
            .is_some_and(|c| c.load(Ordering::SeqCst))
        {
            reaper.kill();
            reaper.wait();
            return Err(HarnessError::Interrupted { pid });
        }
        let now = Instant::now();
        if let Some(deadline) = timeout_at {
            if now >= deadline {
                reaper.kill();
                reaper.wait();
                return Err(HarnessError::Timeout {
                    pid,
                    after: options.timeout.unwrap_or_default(),
                });
            }
        }
        if now < next_sample {
            continue;
        }
        if let Some(reading) = probe::read(pid) {
            let elapsed = now.duration_since(prev_at).as_secs_f64();
            let used = reading.cpu_time.saturating_sub(prev_cpu).as_secs_f64();
            samples.push(Sample {
                at_ms: now.duration_since(started).as_secs_f64() * 1000.0,
                cpu_percent: 100.0 * used / elapsed,
                resident_memory_kib: reading.resident_kib,
            });
            peak_hwm = peak_hwm.max(reading.peak_resident_kib);
            prev_cpu = reading.cpu_time;
            prev_at = now;
        }
        // Skip ticks missed while the sampler was descheduled.
        let behind = now.duration_since(started).as_nanos() / interval.as_nanos();
        tick = (behind as u32).saturating_add(1).max(tick + 1);
    };

    let status = status.map_err(|e| HarnessError::Lost {
        pid,
        detail: e.to_string(),
    })?;
    let wall_time_s = ended
        .duration_since(started)
        .as_secs_f64()
        .max(f64::MIN_POSITIVE);
    let mut stats = summarize(
        &samples,
        exit_code(status),
        wall_time_s,
        options.sampling_interval_ms,
    );
    stats.peak_memory_kib = stats.peak_memory_kib.max(peak_hwm);
    let measurement_type = if probe::SUPPORTED {
        MEASUREMENT_TYPE.to_string()
    } else {
        format!("{MEASUREMENT_TYPE}{UNSAMPLED_SUFFIX}")
    };
    tracing::debug!(
        pid,
        samples = stats.sample_count,
        wall_time_s,
        "measured child exited"
    );
    Ok(Value::new(
        identifier,
        ValueKind::ProcessStats,
        Payload::ProcessStats(stats),
        measurement_type,
    )?)
}
