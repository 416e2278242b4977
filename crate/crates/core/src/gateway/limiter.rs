//! Sliding-window rate limiting over an injectable clock.

use std::collections::VecDeque;
use std::sync::Mutex;
use std::time::{Duration, Instant};

/// Time source for the limiter. The production clock reads real time and
/// sleeps; tests drive a manual clock so limiter behavior is checked without
/// wall-clock waits.
pub trait Clock: Send + Sync {
    fn now(&self) -> Instant;
    fn sleep(&self, duration: Duration);
}

/// Real time.
#[derive(Debug, Default)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> Instant {
        Instant::now()
    }

    fn sleep(&self, duration: Duration) {
        std::thread::sleep(duration);
    }
}

/// Deterministic clock for tests: `sleep` advances time instead of blocking.
#[derive(Debug)]
pub struct ManualClock {
    origin: Instant,
    offset: Mutex<Duration>,
}

impl Default for ManualClock {
    fn default() -> Self {
        ManualClock { origin: Instant::now(), offset: Mutex::new(Duration::ZERO) }
    }
}

impl ManualClock {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn advance(&self, by: Duration) {
        *self.offset.lock().expect("clock lock") += by;
    }

    /// Time elapsed since the clock's origin.
    pub fn elapsed(&self) -> Duration {
        *self.offset.lock().expect("clock lock")
    }
}

impl Clock for ManualClock {
    fn now(&self) -> Instant {
        self.origin + *self.offset.lock().expect("clock lock")
    }

    fn sleep(&self, duration: Duration) {
        self.advance(duration);
    }
}

impl Clock for std::sync::Arc<ManualClock> {
    fn now(&self) -> Instant {
        self.as_ref().now()
    }

    fn sleep(&self, duration: Duration) {
        self.as_ref().sleep(duration);
    }
}

const WINDOW: Duration = Duration::from_secs(1);

/// Admits at most `limit` acquisitions in any sliding one-second window,
/// blocking (via the clock) until admission is allowed. Shared across all
/// callers of one gateway.
pub struct RateLimiter {
    limit: usize,
    recent: Mutex<VecDeque<Instant>>,
    clock: Box<dyn Clock>,
}

impl RateLimiter {
    pub fn new(limit: usize, clock: Box<dyn Clock>) -> Self {
        assert!(limit >= 1, "rate limit must be >= 1");
        RateLimiter { limit, recent: Mutex::new(VecDeque::new()), clock }
    }

    /// Blocks until a call slot is available, then claims it. Returns the
    /// admission instant.
    pub fn acquire(&self) -> Instant {
        loop {
            let wait = {
                let mut recent = self.recent.lock().expect("limiter lock");
                let now = self.clock.now();
                while recent.front().is_some_and(|&t| now.duration_since(t) >= WINDOW) {
                    recent.pop_front();
                }
                if recent.len() < self.limit {
                    recent.push_back(now);
                    return now;
                }
                let oldest = *recent.front().expect("window is full");
                WINDOW - now.duration_since(oldest)
            };
            self.clock.sleep(wait);
        }
    }
}
