//! Per-OS process inspection. Everything platform-specific about reading a
//! live process's CPU time and memory lives here.

use std::time::Duration;

#[derive(Debug, Clone, Copy)]
pub(crate) struct Reading {
    /// User + system CPU time consumed so far, all threads.
    pub cpu_time: Duration,
    pub resident_kib: u64,
    /// Kernel-tracked resident high-water mark, when available.
    pub peak_resident_kib: u64,
}

#[cfg(target_os = "linux")]
mod imp {
    use super::Reading;
    use std::sync::OnceLock;
    use std::time::Duration;

    pub(crate) const SUPPORTED: bool = true;

    fn ticks_per_second() -> u64 {
        static TICKS: OnceLock<u64> = OnceLock::new();
        *TICKS.get_or_init(|| {
            // SAFETY: sysconf has no preconditions.
            let t = unsafe { libc::sysconf(libc::_SC_CLK_TCK) };
            if t > 0 {
                t as u64
            } else {
                100
            }
        })
    }

    /// utime and stime in clock ticks from `/proc/<pid>/stat`.
    pub(crate) fn parse_stat(stat: &str) -> Option<(u64, u64)> {
        // The command name is parenthesised and may itself contain spaces or
        // parentheses, so fields are counted from the last ')'.
        let rest = &stat[stat.rfind(')')? + 1..];
        let mut fields = rest.split_whitespace();
        let utime = fields.nth(11)?.parse().ok()?;
        let stime = fields.next()?.parse().ok()?;
        Some((utime, stime))
    }

    pub(crate) fn parse_status_kib(status: &str, key: &str) -> Option<u64> {
        status
            .lines()
            .find_map(|line| line.strip_prefix(key)?.strip_prefix(':'))
            .and_then(|v| v.split_whitespace().next()?.parse().ok())
    }

    pub(crate) fn read(pid: u32) -> Option<Reading> {
        let stat = std::fs::read_to_string(format!("/proc/{pid}/stat")).ok()?;
        let (utime, stime) = parse_stat(&stat)?;
        let ticks = utime + stime;
        let tps = ticks_per_second();
        let cpu_time = Duration::from_secs(ticks / tps)
            + Duration::from_nanos((ticks % tps) * 1_000_000_000 / tps);
        // A zombie has no memory map; report zero rather than dropping the
        // CPU reading.
        let status = std::fs::read_to_string(format!("/proc/{pid}/status")).unwrap_or_default();
        Some(Reading {
            cpu_time,
            resident_kib: parse_status_kib(&status, "VmRSS").unwrap_or(0),
            peak_resident_kib: parse_status_kib(&status, "VmHWM").unwrap_or(0),
        })
    }
}

#[cfg(not(target_os = "linux"))]
mod imp {
    use super::Reading;

    pub(crate) const SUPPORTED: bool = false;

    pub(crate) fn read(_pid: u32) -> Option<Reading> {
        None
    }
}

pub(crate) use imp::{read, SUPPORTED};
