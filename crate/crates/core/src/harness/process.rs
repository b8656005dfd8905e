//! Running a candidate executable with a deadline.
//!
//! Each candidate runs in its own process group. When the deadline passes,
//! or once the leader exits, the whole group is killed and reaped so no
//! helper process outlives the evaluation.

use std::io::Read;
use std::os::unix::process::CommandExt;
use std::path::{Path, PathBuf};
use std::process::{Child, Command, ExitStatus, Stdio};
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Exit {
    Success,
    Failed(String),
    TimedOut,
    SpawnFailed(String),
}

#[derive(Debug, Clone)]
pub struct ProcessOutcome {
    pub exit: Exit,
    pub stdout: Vec<u8>,
    pub stderr: Vec<u8>,
    pub elapsed: Duration,
}

impl ProcessOutcome {
    /// Last line of stderr, for short failure reasons.
    pub fn stderr_tail(&self) -> String {
        String::from_utf8_lossy(&self.stderr)
            .lines()
            .rev()
            .find(|l| !l.trim().is_empty())
            .unwrap_or("")
            .trim()
            .chars()
            .take(200)
            .collect()
    }
}

/// Resolves a program the way `execvp` would: paths containing a separator
/// are taken as-is, bare names are searched on `PATH`.
pub fn resolve_program(program: &Path) -> Option<PathBuf> {
    if program.components().count() > 1 || program.is_absolute() {
        return program.is_file().then(|| program.to_path_buf());
    }
    let path = std::env::var_os("PATH")?;
    std::env::split_paths(&path)
        .map(|dir| dir.join(program))
        .find(|p| p.is_file())
}

fn drain<R: Read + Send + 'static>(mut pipe: R) -> JoinHandle<Vec<u8>> {
    thread::spawn(move || {
        let mut buf = Vec::new();
        let _ = pipe.read_to_end(&mut buf);
        buf
    })
}

fn kill_group(child: &Child) {
    // The child called setpgid(0, 0), so its pid is the group id.
    let pgid = child.id() as libc::pid_t;
    unsafe {
        libc::killpg(pgid, libc::SIGKILL);
    }
}

fn describe(status: ExitStatus) -> String {
    match status.code() {
        Some(code) => format!("exited with status {code}"),
        None => format!("terminated by signal ({status})"),
    }
}

pub fn run_with_timeout(program: &Path, args: &[String], timeout: Duration) -> ProcessOutcome {
    let start = Instant::now();
    let spawned = Command::new(program)
        .args(args)
        .stdin(Stdio::null())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .process_group(0)
        .spawn();
    let mut child = match spawned {
        Ok(c) => c,
        Err(e) => {
            return ProcessOutcome {
                exit: Exit::SpawnFailed(e.to_string()),
                stdout: Vec::new(),
                stderr: Vec::new(),
                elapsed: start.elapsed(),
            }
        }
    };
    let out = drain(child.stdout.take().expect("stdout is piped"));
    let err = drain(child.stderr.take().expect("stderr is piped"));

    let deadline = start + timeout;
    let mut pause = Duration::from_millis(1);
    let exit = loop {
        match child.try_wait() {
            Ok(Some(status)) if status.success() => break Exit::Success,
            Ok(Some(status)) => break Exit::Failed(describe(status)),
            Ok(None) if Instant::now() >= deadline => {
                kill_group(&child);
                let _ = child.wait();
                break Exit::TimedOut;
            }
            Ok(None) => {
                thread::sleep(pause.min(deadline.saturating_duration_since(Instant::now())));
                pause = (pause * 2).min(Duration::from_millis(20));
            }
            Err(e) => {
                kill_group(&child);
                let _ = child.wait();
                break Exit::Failed(format!("wait failed: {e}"));
            }
        }
    };
    let elapsed = start.elapsed();
    // Background helpers may still hold the pipes open.
    kill_group(&child);
    ProcessOutcome {
        exit,
        stdout: out.join().unwrap_or_default(),
        stderr: err.join().unwrap_or_default(),
        elapsed,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sh(script: &str) -> (PathBuf, Vec<String>) {
        (PathBuf::from("/bin/sh"), vec!["-c".into(), script.into()])
    }

    #[test]
    fn captures_stdout() {
        let (p, a) = sh("echo hello; echo oops >&2");
        let out = run_with_timeout(&p, &a, Duration::from_secs(10));
        assert_eq!(out.exit, Exit::Success);
        assert_eq!(out.stdout, b"hello\n");
        assert_eq!(out.stderr_tail(), "oops");
    }

    #[test]
    fn reports_failure_status() {
        let (p, a) = sh("exit 3");
        let out = run_with_timeout(&p, &a, Duration::from_secs(10));
        assert_eq!(out.exit, Exit::Failed("exited with status 3".into()));
    }

    #[test]
    fn times_out() {
        let (p, a) = sh("sleep 20");
        let out = run_with_timeout(&p, &a, Duration::from_millis(200));
        assert_eq!(out.exit, Exit::TimedOut);
        assert!(out.elapsed < Duration::from_secs(5));
    }

    #[test]
    fn missing_program() {
        let out = run_with_timeout(Path::new("/nonexistent/bin"), &[], Duration::from_secs(1));
        assert!(matches!(out.exit, Exit::SpawnFailed(_)));
        assert!(resolve_program(Path::new("/nonexistent/bin")).is_none());
        assert!(resolve_program(Path::new("sh")).is_some());
    }
}
