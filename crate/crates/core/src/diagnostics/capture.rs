use std::io::{self, Read};
use std::os::unix::process::{CommandExt, ExitStatusExt};
use std::path::{Path, PathBuf};
use std::process::{Command, ExitStatus, Stdio};
use std::thread;
use std::time::Duration;

use thiserror::Error;
use wait_timeout::ChildExt;

use super::RawCapture;
use crate::util::now_ms;

#[derive(Debug, Error)]
pub enum CaptureError {
    #[error("empty command line")]
    EmptyCommand,
    #[error("command line could not be split into arguments: {0:?}")]
    UnparsableCommand(String),
    #[error("working directory {0} does not exist")]
    MissingWorkingDir(PathBuf),
    #[error("failed to spawn `{program}`: {source}")]
    SpawnFailure {
        program: String,
        #[source]
        source: io::Error,
    },
    #[error("i/o error while capturing: {0}")]
    Io(#[from] io::Error),
}

/// Runs `command_line` in `working_dir`, capturing stdout and stderr.
///
/// The command line is split shell-style but not interpreted by a shell, so a
/// missing program surfaces as [`CaptureError::SpawnFailure`]. When `timeout`
/// elapses the whole process group is killed and the partial capture is
/// returned with `timed_out` set.
pub fn capture_command(
    command_line: &str,
    working_dir: &Path,
    timeout: Duration,
) -> Result<RawCapture, CaptureError> {
    if command_line.trim().is_empty() {
        return Err(CaptureError::EmptyCommand);
    }
    if !working_dir.is_dir() {
        return Err(CaptureError::MissingWorkingDir(working_dir.to_path_buf()));
    }
    let argv = shlex::split(command_line)
        .filter(|a| !a.is_empty())
        .ok_or_else(|| CaptureError::UnparsableCommand(command_line.to_string()))?;

    let started_at = now_ms();
    let mut child = Command::new(&argv[0])
        .args(&argv[1..])
        .current_dir(working_dir)
        .stdin(Stdio::null())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .process_group(0)
        .spawn()
        .map_err(|source| CaptureError::SpawnFailure { program: argv[0].clone(), source })?;

    let stdout = child.stdout.take().expect("stdout piped");
    let stderr = child.stderr.take().expect("stderr piped");
    let out_reader = thread::spawn(move || read_all(stdout));
    let err_reader = thread::spawn(move || read_all(stderr));

    let (status, timed_out) = match child.wait_timeout(timeout)? {
        Some(status) => (status, false),
        None => {
            kill_group(child.id());
            let _ = child.kill();
            (child.wait()?, true)
        }
    };
    // A surviving grandchild could keep the pipes open; the group kill above
    // covers the timeout case, a clean exit closes them on its own.
    let stdout = out_reader.join().unwrap_or_default();
    let stderr = err_reader.join().unwrap_or_default();

    Ok(RawCapture {
        command_line: command_line.to_string(),
        exit_code: exit_code_of(status),
        stdout,
        stderr,
        started_at,
        finished_at: now_ms().max(started_at),
        working_dir: working_dir.to_path_buf(),
        timed_out,
    })
}

fn read_all(mut r: impl Read) -> Vec<u8> {
    let mut buf = Vec::new();
    let _ = r.read_to_end(&mut buf);
    buf
}

fn kill_group(pid: u32) {
    // SAFETY: kill(2) with a negative pid signals the process group created by
    // `process_group(0)`; no memory is touched.
    unsafe {
        libc::kill(-(pid as i32), libc::SIGKILL);
    }
}

fn exit_code_of(status: ExitStatus) -> i32 {
    match (status.code(), status.signal()) {
        (Some(code), _) => code,
        (None, Some(sig)) => 128 + sig,
        (None, None) => -1,
    }
}
