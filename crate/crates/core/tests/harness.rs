use std::sync::atomic::AtomicBool;
use std::sync::{Arc, Mutex, MutexGuard};
use std::time::{Duration, Instant};

use mlte::harness::{run_measured, HarnessError, RunOptions, MEASUREMENT_TYPE, RUN_ID_ENV};
use mlte::{project_stat, Payload, ProcessStats, Value, ValueKind};

// The machine may have a single core; CPU figures are only meaningful when
// measured children do not compete with each other.
static SERIAL: Mutex<()> = Mutex::new(());

fn serial() -> MutexGuard<'static, ()> {
    SERIAL.lock().unwrap_or_else(|e| e.into_inner())
}

fn cmd(parts: &[&str]) -> Vec<String> {
    parts.iter().map(|s| s.to_string()).collect()
}

fn spin(seconds: f64) -> Vec<String> {
    let script = format!(
        "import time\nend = time.monotonic() + {seconds}\nwhile time.monotonic() < end: pass"
    );
    vec!["python3".into(), "-c".into(), script]
}

fn stats(value: &Value) -> &ProcessStats {
    value.process_stats().expect("process stats payload")
}

#[test]
fn sleeping_child_uses_almost_no_cpu() {
    let _g = serial();
    let value = run_measured("sleep", &cmd(&["sleep", "1"]), &RunOptions::default()).unwrap();
    let s = stats(&value);
    assert_eq!(value.kind(), ValueKind::ProcessStats);
    assert_eq!(value.measurement_type(), MEASUREMENT_TYPE);
    assert!(s.cpu_avg_percent <= 5.0, "{s:?}");
    assert!((s.wall_time_s - 1.0).abs() <= 0.2, "{s:?}");
    assert_eq!(s.exit_code, 0);
    assert_eq!(s.sampling_interval_ms, 100);
    assert!(s.sample_count >= 8, "{s:?}");
}

#[test]
fn spinning_child_saturates_one_core() {
    let _g = serial();
    let value = run_measured("spin", &spin(1.5), &RunOptions::default()).unwrap();
    let s = stats(&value);
    assert!(s.cpu_avg_percent >= 50.0, "{s:?}");
    assert!(s.cpu_min_percent <= s.cpu_avg_percent && s.cpu_avg_percent <= s.cpu_max_percent);
    assert!((s.wall_time_s - 1.5).abs() <= 0.3, "{s:?}");
    assert!(s.peak_memory_kib > 0);
}

#[test]
fn doubling_duration_doubles_sample_count() {
    let _g = serial();
    let opts = RunOptions::default().with_interval_ms(50);
    let short = run_measured("short", &cmd(&["sleep", "0.6"]), &opts).unwrap();
    let long = run_measured("long", &cmd(&["sleep", "1.2"]), &opts).unwrap();
    let (a, b) = (
        stats(&short).sample_count as i64,
        stats(&long).sample_count as i64,
    );
    assert!((b - 2 * a).abs() <= 2, "{a} vs {b}");
}

#[test]
fn nonzero_exit_is_recorded_not_raised() {
    let _g = serial();
    let value = run_measured(
        "fails",
        &cmd(&["sh", "-c", "exit 3"]),
        &RunOptions::default(),
    )
    .unwrap();
    assert_eq!(stats(&value).exit_code, 3);
    let killed = run_measured(
        "killed",
        &cmd(&["sh", "-c", "kill -9 $$"]),
        &RunOptions::default(),
    )
    .unwrap();
    assert_eq!(stats(&killed).exit_code, 128 + 9);
}

#[test]
fn child_sees_its_run_id() {
    let _g = serial();
    let script = format!("test \"${RUN_ID_ENV}\" = run-42");
    let value = run_measured(
        "run-42",
        &cmd(&["sh", "-c", &script]),
        &RunOptions::default(),
    )
    .unwrap();
    assert_eq!(stats(&value).exit_code, 0);
}

#[test]
fn missing_program_is_a_spawn_failure() {
    let err =
        run_measured("x", &cmd(&["/nonexistent/program"]), &RunOptions::default()).unwrap_err();
    assert!(matches!(err, HarnessError::SpawnFailure { .. }), "{err:?}");
}

/// Processes whose environment carries `MLTE_RUN_ID=<id>`.
#[cfg(target_os = "linux")]
fn processes_tagged(id: &str) -> Vec<u32> {
    let needle = format!("{RUN_ID_ENV}={id}");
    let mut found = Vec::new();
    for entry in std::fs::read_dir("/proc").unwrap().flatten() {
        let Ok(pid) = entry.file_name().to_string_lossy().parse::<u32>() else {
            continue;
        };
        if let Ok(env) = std::fs::read(entry.path().join("environ")) {
            if env.split(|&b| b == 0).any(|kv| kv == needle.as_bytes()) {
                found.push(pid);
            }
        }
    }
    found
}

#[cfg(target_os = "linux")]
#[test]
fn timeout_kills_the_whole_process_group() {
    let _g = serial();
    let id = format!("orphan-check-{}", std::process::id());
    // The shell forks a grandchild sleep that would outlive a naive kill.
    let started = Instant::now();
    let err = run_measured(
        &id,
        &cmd(&["sh", "-c", "sleep 30 & sleep 30; wait"]),
        &RunOptions::default().with_timeout(Duration::from_millis(500)),
    )
    .unwrap_err();
    assert!(matches!(err, HarnessError::Timeout { .. }), "{err:?}");
    assert!(started.elapsed() < Duration::from_secs(5));
    // SIGKILL delivery is asynchronous for grandchildren reparented to init.
    let deadline = Instant::now() + Duration::from_secs(2);
    while !processes_tagged(&id).is_empty() && Instant::now() < deadline {
        std::thread::sleep(Duration::from_millis(20));
    }
    assert_eq!(processes_tagged(&id), Vec::<u32>::new());
}

#[test]
fn cancellation_interrupts_the_run() {
    let _g = serial();
    let flag = Arc::new(AtomicBool::new(false));
    let setter = flag.clone();
    std::thread::spawn(move || {
        std::thread::sleep(Duration::from_millis(300));
        setter.store(true, std::sync::atomic::Ordering::SeqCst);
    });
    let err = run_measured(
        "cancelled",
        &cmd(&["sleep", "30"]),
        &RunOptions::default().with_cancel(flag),
    )
    .unwrap_err();
    assert!(matches!(err, HarnessError::Interrupted { .. }), "{err:?}");
}

#[test]
fn every_stat_field_projects_to_a_real() {
    let _g = serial();
    let value = run_measured("cpu stats", &cmd(&["sleep", "0.3"]), &RunOptions::default()).unwrap();
    let s = stats(&value).clone();
    let expected = [
        ("cpu_avg_percent", s.cpu_avg_percent),
        ("cpu_min_percent", s.cpu_min_percent),
        ("cpu_max_percent", s.cpu_max_percent),
        ("peak_memory_kib", s.peak_memory_kib as f64),
        ("wall_time_s", s.wall_time_s),
        ("exit_code", s.exit_code as f64),
        ("sample_count", s.sample_count as f64),
        ("sampling_interval_ms", s.sampling_interval_ms as f64),
    ];
    for (field, want) in expected {
        let projected = project_stat(&value, field).unwrap();
        assert_eq!(projected.identifier(), format!("cpu stats.{field}"));
        assert_eq!(projected.payload(), &Payload::Real(want), "{field}");
    }
    assert!(project_stat(&value, "cpu_median").is_err());
}
