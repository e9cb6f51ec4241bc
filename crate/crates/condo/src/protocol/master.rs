//! The polling side of the link. One request is in flight at a time across
//! all slaves: the link lock is held from send until the reply (or the last
//! retry) so concurrent callers queue.

use std::net::SocketAddr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex as StdMutex;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;
use tokio::net::TcpStream;
use tokio::sync::Mutex;
use tokio::time::timeout;

use super::frame::{Frame, FrameError, BROADCAST, EXCEPTION_FLAG};
use super::transport::{read_frame, write_frame, TransportError};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MasterConfig {
    /// Reply timeout per attempt, milliseconds.
    pub timeout_ms: u64,
    /// Extra attempts after a timeout or a corrupt reply.
    pub retries: u32,
    pub connect_timeout_ms: u64,
}

impl Default for MasterConfig {
    fn default() -> Self {
        Self {
            timeout_ms: 500,
            retries: 2,
            connect_timeout_ms: 1000,
        }
    }
}

#[derive(Debug, Error)]
pub enum MasterError {
    #[error("slave {address} did not answer after {attempts} attempts")]
    Timeout { address: u8, attempts: u32 },
    #[error("slave {address} answered with exception {code}")]
    SlaveException { address: u8, code: u8 },
    #[error("protocol violation: {0}")]
    ProtocolViolation(String),
    #[error("corrupt replies from slave {address} after {attempts} attempts: {last}")]
    Corrupt {
        address: u8,
        attempts: u32,
        last: FrameError,
    },
    #[error("link to {endpoint} failed after {attempts} attempts: {source}")]
    Link {
        endpoint: SocketAddr,
        attempts: u32,
        source: std::io::Error,
    },
    #[error(transparent)]
    Frame(#[from] FrameError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EventKind {
    Sent,
    Replied,
    TimedOut,
    Corrupt,
    LinkDown,
    Violation,
    Broadcast,
}

impl EventKind {
    /// Whether this event closes the attempt opened by the preceding `Sent`.
    pub fn closes_attempt(self) -> bool {
        !matches!(self, Self::Sent | Self::Broadcast)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MasterEvent {
    pub transaction: u64,
    pub attempt: u32,
    pub kind: EventKind,
    pub address: u8,
    pub function: u8,
    /// Microseconds since the master was created.
    pub at_us: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transaction {
    pub reply: Frame,
    pub retries: u32,
}

pub struct Master {
    endpoint: SocketAddr,
    cfg: MasterConfig,
    link: Mutex<Option<TcpStream>>,
    log: StdMutex<Vec<MasterEvent>>,
    next_id: AtomicU64,
    epoch: Instant,
}

enum Attempt {
    Reply(Frame),
    Retry(Failure),
}

enum Failure {
    Timeout,
    Corrupt(FrameError),
    Link(std::io::Error),
}

impl Master {
    pub fn new(endpoint: SocketAddr, cfg: MasterConfig) -> Self {
        Self {
            endpoint,
            cfg,
            link: Mutex::new(None),
            log: StdMutex::new(Vec::new()),
            next_id: AtomicU64::new(1),
            epoch: Instant::now(),
        }
    }

    pub fn endpoint(&self) -> SocketAddr {
        self.endpoint
    }

    pub fn config(&self) -> &MasterConfig {
        &self.cfg
    }

    pub fn events(&self) -> Vec<MasterEvent> {
        self.log.lock().expect("event log").clone()
    }

    fn record(&self, transaction: u64, attempt: u32, kind: EventKind, req: &Frame) {
        let at_us = self.epoch.elapsed().as_micros() as u64;
        self.log.lock().expect("event log").push(MasterEvent {
            transaction,
            attempt,
            kind,
            address: req.address,
            function: req.function,
            at_us,
        });
    }

    async fn connected<'a>(
        &self,
        link: &'a mut Option<TcpStream>,
    ) -> std::io::Result<&'a mut TcpStream> {
        if link.is_none() {
            let dur = Duration::from_millis(self.cfg.connect_timeout_ms);
            let s = timeout(dur, TcpStream::connect(self.endpoint))
                .await
                .map_err(|_| {
                    std::io::Error::new(std::io::ErrorKind::TimedOut, "connect timed out")
                })??;
            s.set_nodelay(true)?;
            *link = Some(s);
        }
        Ok(link.as_mut().expect("just connected"))
    }

    /// Sends `req` and waits for the addressed slave's answer, retrying on
    /// timeouts and corrupt replies.
    pub async fn transact(&self, req: &Frame) -> Result<Transaction, MasterError> {
        if req.address == BROADCAST {
            return Err(MasterError::ProtocolViolation(
                "broadcasts get no reply; use broadcast()".into(),
            ));
        }
        let bytes = req.encode()?;
        let id = self.next_id.fetch_add(1, Ordering::Relaxed);
        let mut link = self.link.lock().await;
        let attempts = self.cfg.retries + 1;
        let mut last = Failure::Timeout;
        for attempt in 0..attempts {
            self.record(id, attempt, EventKind::Sent, req);
            match self.attempt(&mut link, &bytes).await {
                Attempt::Reply(reply) => {
                    if reply.address != req.address
                        || reply.function & !EXCEPTION_FLAG != req.function
                    {
                        self.record(id, attempt, EventKind::Violation, req);
                        *link = None;
                        return Err(MasterError::ProtocolViolation(format!(
                            "request {} answered by {}",
                            req, reply
                        )));
                    }
                    self.record(id, attempt, EventKind::Replied, req);
                    if let Some(code) = reply.exception_code() {
                        return Err(MasterError::SlaveException {
                            address: req.address,
                            code,
                        });
                    }
                    return Ok(Transaction {
                        reply,
                        retries: attempt,
                    });
                }
                Attempt::Retry(f) => {
                    let kind = match &f {
                        Failure::Timeout => EventKind::TimedOut,
                        Failure::Corrupt(_) => EventKind::Corrupt,
                        Failure::Link(_) => EventKind::LinkDown,
                    };
                    self.record(id, attempt, kind, req);
                    log::debug!("{req}: attempt {} failed ({kind:?})", attempt + 1);
                    // the stream may still deliver a stale reply; start clean
                    *link = None;
                    last = f;
                }
            }
        }
        Err(match last {
            Failure::Timeout => MasterError::Timeout {
                address: req.address,
                attempts,
            },
            Failure::Corrupt(e) => MasterError::Corrupt {
                address: req.address,
                attempts,
                last: e,
            },
            Failure::Link(source) => MasterError::Link {
                endpoint: self.endpoint,
                attempts,
                source,
            },
        })
    }

    async fn attempt(&self, link: &mut Option<TcpStream>, bytes: &[u8]) -> Attempt {
        let stream = match self.connected(link).await {
            Ok(s) => s,
            Err(e) => return Attempt::Retry(Failure::Link(e)),
        };
        if let Err(e) = super::transport::write_raw(stream, bytes).await {
            return Attempt::Retry(match e {
                TransportError::Io(e) => Failure::Link(e),
                TransportError::Frame(e) => Failure::Corrupt(e),
            });
        }
        match timeout(
            Duration::from_millis(self.cfg.timeout_ms),
            read_frame(stream),
        )
        .await
        {
            Err(_) => Attempt::Retry(Failure::Timeout),
            Ok(Ok(Some(f))) => Attempt::Reply(f),
            Ok(Ok(None)) => Attempt::Retry(Failure::Link(std::io::ErrorKind::UnexpectedEof.into())),
            Ok(Err(TransportError::Frame(e))) => Attempt::Retry(Failure::Corrupt(e)),
            Ok(Err(TransportError::Io(e))) => Attempt::Retry(Failure::Link(e)),
        }
    }

    /// Sends a frame to every slave. Nobody answers, so delivery is not
    /// confirmed.
    pub async fn broadcast(&self, req: &Frame) -> Result<(), MasterError> {
        if req.address != BROADCAST {
            return Err(MasterError::ProtocolViolation(format!(
                "{req} is not a broadcast"
            )));
        }
        let id = self.next_id.fetch_add(1, Ordering::Relaxed);
        let mut link = self.link.lock().await;
        let stream = self
            .connected(&mut link)
            .await
            .map_err(|source| MasterError::Link {
                endpoint: self.endpoint,
                attempts: 1,
                source,
            })?;
        let sent = write_frame(stream, req).await;
        self.record(id, 0, EventKind::Broadcast, req);
        match sent {
            Ok(()) => Ok(()),
            Err(e) => {
                *link = None;
                Err(match e {
                    TransportError::Io(source) => MasterError::Link {
                        endpoint: self.endpoint,
                        attempts: 1,
                        source,
                    },
                    TransportError::Frame(e) => e.into(),
                })
            }
        }
    }
}

/// Checks an event log for two requests in flight at once. Returns the
/// offending transaction ids.
pub fn overlapping_requests(events: &[MasterEvent]) -> Option<(u64, u64)> {
    let mut open: Option<u64> = None;
    for e in events {
        match e.kind {
            EventKind::Sent => {
                if let Some(t) = open {
                    return Some((t, e.transaction));
                }
                open = Some(e.transaction);
            }
            EventKind::Broadcast => {
                if let Some(t) = open {
                    return Some((t, e.transaction));
                }
            }
            k if k.closes_attempt() => open = None,
            _ => {}
        }
    }
    None
}
