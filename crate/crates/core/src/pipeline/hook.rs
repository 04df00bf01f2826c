use std::path::Path;
use std::process::{Command, Stdio};
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::PipelineError;
use crate::corpus::ImageId;

/// External restoration command run through `sh -c`, one image at a time.
#[derive(Debug, Clone, PartialEq)]
pub struct RestorationHook {
    template: String,
    timeout: Duration,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum HookStatus {
    Ok,
    Exit { code: Option<i32> },
    Timeout,
    MissingOutput,
    SpawnError { message: String },
}

impl HookStatus {
    pub fn is_ok(&self) -> bool {
        matches!(self, HookStatus::Ok)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HookRecord {
    pub image_id: ImageId,
    #[serde(flatten)]
    pub status: HookStatus,
}

fn shell_quote(s: &str) -> String {
    format!("'{}'", s.replace('\'', r"'\''"))
}

const POLL_INTERVAL: Duration = Duration::from_millis(5);

impl RestorationHook {
    pub fn new(template: impl Into<String>, timeout_secs: f64) -> Result<Self, PipelineError> {
        let template = template.into();
        if !template.contains("{input}") || !template.contains("{output}") {
            return Err(PipelineError::Usage(
                "restoration command needs {input} and {output} placeholders".into(),
            ));
        }
        if !(timeout_secs > 0.0) {
            return Err(PipelineError::Usage("restoration timeout must be positive".into()));
        }
        Ok(RestorationHook {
            template,
            timeout: Duration::from_secs_f64(timeout_secs),
        })
    }

    pub fn command_line(&self, input: &Path, output: &Path) -> String {
        self.template
            .replace("{input}", &shell_quote(&input.to_string_lossy()))
            .replace("{output}", &shell_quote(&output.to_string_lossy()))
    }

    /// Runs the hook once. Never panics or propagates errors; every outcome is a status.
    pub fn run(&self, input: &Path, output: &Path) -> HookStatus {
        let mut child = match Command::new("sh")
            .arg("-c")
            .arg(self.command_line(input, output))
            .stdin(Stdio::null())
            .stdout(Stdio::null())
            .stderr(Stdio::null())
            .spawn()
        {
            Ok(c) => c,
            Err(e) => return HookStatus::SpawnError { message: e.to_string() },
        };
        let start = Instant::now();
        loop {
            match child.try_wait() {
                Ok(Some(status)) if status.success() => {
                    return if output.exists() {
                        HookStatus::Ok
                    } else {
                        HookStatus::MissingOutput
                    };
                }
                Ok(Some(status)) => return HookStatus::Exit { code: status.code() },
                Ok(None) if start.elapsed() >= self.timeout => {
                    let _ = child.kill();
                    let _ = child.wait();
                    return HookStatus::Timeout;
                }
                Ok(None) => thread::sleep(POLL_INTERVAL),
                Err(e) => return HookStatus::SpawnError { message: e.to_string() },
            }
        }
    }
}
