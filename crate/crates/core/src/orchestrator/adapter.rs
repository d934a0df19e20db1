//! Command runners. The default shells out on the host (container commands
//! go through the Docker CLI); tests use the mock and spy variants.

use std::collections::VecDeque;
use std::path::Path;
use std::process::Command;
use std::sync::Mutex;

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CommandOutput {
    pub status: i32,
    pub stdout: String,
    pub stderr: String,
}

impl CommandOutput {
    pub fn ok(stdout: impl Into<String>) -> Self {
        CommandOutput {
            status: 0,
            stdout: stdout.into(),
            stderr: String::new(),
        }
    }

    pub fn success(&self) -> bool {
        self.status == 0
    }
}

#[derive(Debug, thiserror::Error)]
pub enum AdapterError {
    #[error("cannot start `{command}`: {source}")]
    Spawn {
        command: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Other(String),
}

/// Runs one shell command line. Implementations must tolerate concurrent
/// calls.
pub trait RuntimeAdapter: Sync {
    fn run(&self, command: &str, cwd: &Path) -> Result<CommandOutput, AdapterError>;
}

/// Runs each line with `sh -c` on the host.
#[derive(Debug, Clone, Default)]
pub struct DockerAdapter;

impl RuntimeAdapter for DockerAdapter {
    fn run(&self, command: &str, cwd: &Path) -> Result<CommandOutput, AdapterError> {
        log::debug!("run: {command}");
        let out = Command::new("sh")
            .arg("-c")
            .arg(command)
            .current_dir(cwd)
            .output()
            .map_err(|source| AdapterError::Spawn {
                command: command.to_string(),
                source,
            })?;
        Ok(CommandOutput {
            status: out.status.code().unwrap_or(-1),
            stdout: String::from_utf8_lossy(&out.stdout).into_owned(),
            stderr: String::from_utf8_lossy(&out.stderr).into_owned(),
        })
    }
}

#[derive(Debug)]
enum Rule {
    Respond { needle: String, output: CommandOutput },
    Fail { needle: String, status: i32 },
}

/// Scripted adapter: records every call and answers from rules matched by
/// substring (first match wins). Unmatched commands succeed silently.
#[derive(Debug, Default)]
pub struct MockAdapter {
    rules: Vec<Rule>,
    calls: Mutex<Vec<String>>,
    fail_at_call: Option<usize>,
    queued: Mutex<VecDeque<(String, CommandOutput)>>,
}

impl MockAdapter {
    pub fn new() -> Self {
        MockAdapter::default()
    }

    pub fn respond(mut self, needle: &str, stdout: &str) -> Self {
        self.rules.push(Rule::Respond {
            needle: needle.to_string(),
            output: CommandOutput::ok(stdout),
        });
        self
    }

    /// Every command containing `needle` exits with `status`.
    pub fn fail_on(mut self, needle: &str, status: i32) -> Self {
        self.rules.push(Rule::Fail {
            needle: needle.to_string(),
            status,
        });
        self
    }

    /// The `n`th call (1-based) returns an adapter error.
    pub fn fail_at_call(mut self, n: usize) -> Self {
        self.fail_at_call = Some(n);
        self
    }

    /// One-shot answer for the next command containing `needle`; consulted
    /// before the standing rules.
    pub fn queue(&self, needle: &str, stdout: &str) {
        self.queued
            .lock()
            .unwrap()
            .push_back((needle.to_string(), CommandOutput::ok(stdout)));
    }

    pub fn calls(&self) -> Vec<String> {
        self.calls.lock().unwrap().clone()
    }
}

impl RuntimeAdapter for MockAdapter {
    fn run(&self, command: &str, _cwd: &Path) -> Result<CommandOutput, AdapterError> {
        let n = {
            let mut calls = self.calls.lock().unwrap();
            calls.push(command.to_string());
            calls.len()
        };
        if self.fail_at_call == Some(n) {
            return Err(AdapterError::Other(format!("injected failure at call {n}")));
        }
        {
            let mut q = self.queued.lock().unwrap();
            if let Some(pos) = q.iter().position(|(needle, _)| command.contains(needle.as_str())) {
                return Ok(q.remove(pos).expect("position is valid").1);
            }
        }
        for rule in &self.rules {
            match rule {
                Rule::Respond { needle, output } if command.contains(needle.as_str()) => return Ok(output.clone()),
                Rule::Fail { needle, status } if command.contains(needle.as_str()) => {
                    return Ok(CommandOutput {
                        status: *status,
                        stdout: String::new(),
                        stderr: format!("mock failure on `{needle}`"),
                    })
                }
                _ => {}
            }
        }
        Ok(CommandOutput::default())
    }
}

/// Wraps another adapter and records each command it forwards.
#[derive(Debug)]
pub struct SpyAdapter<A> {
    inner: A,
    calls: Mutex<Vec<String>>,
}

impl<A: RuntimeAdapter> SpyAdapter<A> {
    pub fn new(inner: A) -> Self {
        SpyAdapter {
            inner,
            calls: Mutex::new(Vec::new()),
        }
    }

    pub fn call_count(&self) -> usize {
        self.calls.lock().unwrap().len()
    }

    pub fn calls(&self) -> Vec<String> {
        self.calls.lock().unwrap().clone()
    }

    pub fn into_inner(self) -> A {
        self.inner
    }
}

impl<A: RuntimeAdapter> RuntimeAdapter for SpyAdapter<A> {
    fn run(&self, command: &str, cwd: &Path) -> Result<CommandOutput, AdapterError> {
        self.calls.lock().unwrap().push(command.to_string());
        self.inner.run(command, cwd)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mock_rules() {
        let m = MockAdapter::new().respond("iflink", "7\n").fail_on("fdb", 2);
        let cwd = Path::new(".");
        assert_eq!(m.run("docker exec a cat iflink", cwd).unwrap().stdout, "7\n");
        assert_eq!(m.run("bridge fdb add x", cwd).unwrap().status, 2);
        assert!(m.run("true", cwd).unwrap().success());
        m.queue("iflink", "9\n");
        assert_eq!(m.run("cat iflink", cwd).unwrap().stdout, "9\n");
        assert_eq!(m.run("cat iflink", cwd).unwrap().stdout, "7\n");
        assert_eq!(m.calls().len(), 5);
    }

    #[test]
    fn mock_injected_error() {
        let m = MockAdapter::new().fail_at_call(2);
        let cwd = Path::new(".");
        assert!(m.run("a", cwd).is_ok());
        assert!(m.run("b", cwd).is_err());
    }

    #[test]
    fn spy_counts() {
        let s = SpyAdapter::new(MockAdapter::new());
        s.run("x", Path::new(".")).unwrap();
        assert_eq!(s.call_count(), 1);
        assert_eq!(s.into_inner().calls(), ["x"]);
    }

    #[cfg(unix)]
    #[test]
    fn shell_adapter_runs() {
        let out = DockerAdapter.run("echo hi; exit 3", Path::new(".")).unwrap();
        assert_eq!(out.stdout, "hi\n");
        assert_eq!(out.status, 3);
    }
}
