//! Newline-delimited JSON transport to external plugins.
//!
//! A plugin is either a subprocess speaking over stdin/stdout or an HTTP
//! endpoint. Subprocesses must print a handshake line
//! `{"protocol": <name>, "version": <n>}` before anything else; HTTP
//! endpoints return the same object from `GET <url>`. After that every
//! request is one JSON line answered by exactly one JSON line.

use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::Mutex;
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use tracing::{debug, warn};

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(30);

#[derive(Debug, Error)]
pub enum PluginError {
    #[error("failed to launch plugin `{command}`: {source}")]
    Spawn {
        command: String,
        #[source]
        source: std::io::Error,
    },
    #[error("plugin command is empty")]
    EmptyCommand,
    #[error("plugin handshake failed: {0}")]
    Handshake(String),
    #[error("plugin did not answer within {0:?}")]
    Timeout(Duration),
    #[error("plugin closed its output stream")]
    Closed,
    #[error("plugin I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("plugin HTTP error: {0}")]
    Http(String),
    #[error("plugin protocol violation: {0}")]
    Protocol(String),
}

#[derive(Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Handshake {
    pub protocol: String,
    pub version: u32,
}

/// A plugin endpoint: `http(s)://...` URLs use HTTP POST, anything else is
/// a whitespace-separated command line.
pub struct Plugin {
    transport: Transport,
    protocol: &'static str,
    version: u32,
}

enum Transport {
    Process {
        command: String,
        timeout: Duration,
        live: Mutex<Option<LineProcess>>,
    },
    Http {
        url: String,
        agent: ureq::Agent,
    },
}

impl Plugin {
    pub fn connect(
        endpoint: &str,
        protocol: &'static str,
        version: u32,
        timeout: Duration,
    ) -> Result<Self, PluginError> {
        let transport = if endpoint.starts_with("http://") || endpoint.starts_with("https://") {
            let agent: ureq::Agent = ureq::Agent::config_builder()
                .timeout_global(Some(timeout))
                .http_status_as_error(false)
                .build()
                .into();
            let mut resp = agent
                .get(endpoint)
                .call()
                .map_err(|e| PluginError::Handshake(e.to_string()))?;
            let body = resp
                .body_mut()
                .read_to_string()
                .map_err(|e| PluginError::Handshake(e.to_string()))?;
            check_handshake(body.trim(), protocol, version)?;
            Transport::Http {
                url: endpoint.to_string(),
                agent,
            }
        } else {
            let process = LineProcess::spawn(endpoint, protocol, version, timeout)?;
            Transport::Process {
                command: endpoint.to_string(),
                timeout,
                live: Mutex::new(Some(process)),
            }
        };
        Ok(Self {
            transport,
            protocol,
            version,
        })
    }

    /// Send one request line, return the single response line.
    ///
    /// A timed-out subprocess is killed and relaunched on the next call so
    /// a late answer cannot be mistaken for a later response.
    pub fn exchange(&self, request: &str) -> Result<String, PluginError> {
        match &self.transport {
            Transport::Process {
                command,
                timeout,
                live,
            } => {
                let mut guard = live.lock().unwrap_or_else(|p| p.into_inner());
                if guard.is_none() {
                    debug!(command = %command, "relaunching plugin");
                    *guard = Some(LineProcess::spawn(
                        command,
                        self.protocol,
                        self.version,
                        *timeout,
                    )?);
                }
                let process = guard.as_mut().expect("process present");
                match process.exchange(request) {
                    Ok(line) => Ok(line),
                    Err(err) => {
                        warn!(command = %command, error = %err, "dropping plugin process");
                        *guard = None;
                        Err(err)
                    }
                }
            }
            Transport::Http { url, agent } => {
                let mut resp = agent
                    .post(url.as_str())
                    .header("content-type", "application/json")
                    .send(request)
                    .map_err(http_error)?;
                if !resp.status().is_success() {
                    return Err(PluginError::Http(format!("status {}", resp.status())));
                }
                let body = resp.body_mut().read_to_string().map_err(http_error)?;
                let body = body.trim();
                if body.contains('\n') {
                    return Err(PluginError::Protocol("multi-line HTTP response".into()));
                }
                Ok(body.to_string())
            }
        }
    }
}

fn http_error(err: ureq::Error) -> PluginError {
    match err {
        ureq::Error::Timeout(_) => PluginError::Timeout(Duration::ZERO),
        other => PluginError::Http(other.to_string()),
    }
}

fn check_handshake(line: &str, protocol: &str, version: u32) -> Result<(), PluginError> {
    let hs: Handshake = serde_json::from_str(line)
        .map_err(|e| PluginError::Handshake(format!("unparseable handshake {line:?}: {e}")))?;
    if hs.protocol != protocol || hs.version != version {
        return Err(PluginError::Handshake(format!(
            "expected {protocol} v{version}, got {} v{}",
            hs.protocol, hs.version
        )));
    }
    Ok(())
}

struct LineProcess {
    child: Child,
    stdin: ChildStdin,
    lines: Receiver<std::io::Result<String>>,
    timeout: Duration,
}

impl LineProcess {
    fn spawn(
        command: &str,
        protocol: &str,
        version: u32,
        timeout: Duration,
    ) -> Result<Self, PluginError> {
        let mut parts = command.split_whitespace();
        let program = parts.next().ok_or(PluginError::EmptyCommand)?;
        let mut child = Command::new(program)
            .args(parts)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|source| PluginError::Spawn {
                command: command.to_string(),
                source,
            })?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                if tx.send(line).is_err() {
                    break;
                }
            }
        });
        let mut process = Self {
            child,
            stdin,
            lines: rx,
            timeout,
        };
        let first = process.read_line().map_err(|e| match e {
            PluginError::Closed | PluginError::Timeout(_) => {
                PluginError::Handshake(format!("no handshake from `{command}`: {e}"))
            }
            other => other,
        })?;
        check_handshake(&first, protocol, version)?;
        Ok(process)
    }

    fn read_line(&mut self) -> Result<String, PluginError> {
        match self.lines.recv_timeout(self.timeout) {
            Ok(Ok(line)) => Ok(line),
            Ok(Err(e)) => Err(PluginError::Io(e)),
            Err(RecvTimeoutError::Timeout) => Err(PluginError::Timeout(self.timeout)),
            Err(RecvTimeoutError::Disconnected) => Err(PluginError::Closed),
        }
    }

    fn exchange(&mut self, request: &str) -> Result<String, PluginError> {
        debug_assert!(!request.contains('\n'));
        self.stdin.write_all(request.as_bytes())?;
        self.stdin.write_all(b"\n")?;
        self.stdin.flush()?;
        self.read_line()
    }
}

impl Drop for LineProcess {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}
