use std::time::{Duration, Instant};

use crate::messaging::Millis;

/// Simulated time in milliseconds since scenario start.
///
/// With `speed == 0` time jumps straight to the next event. Otherwise
/// advancing sleeps so that simulated time runs `speed` times faster than
/// wall time.
#[derive(Debug, Clone)]
pub struct SimClock {
    now: Millis,
    speed: f64,
    anchor: Option<(Instant, Millis)>,
}

impl SimClock {
    pub fn new(speed: f64) -> Self {
        Self { now: 0, speed: if speed.is_finite() && speed > 0.0 { speed } else { 0.0 }, anchor: None }
    }

    pub fn now(&self) -> Millis {
        self.now
    }

    pub fn speed(&self) -> f64 {
        self.speed
    }

    /// Moves to `t`; never moves backwards.
    pub fn advance_to(&mut self, t: Millis) {
        if t <= self.now {
            return;
        }
        if self.speed > 0.0 {
            let (wall, sim) = *self.anchor.get_or_insert((Instant::now(), self.now));
            let due = wall + Duration::from_secs_f64((t - sim) as f64 / 1000.0 / self.speed);
            let now = Instant::now();
            if due > now {
                std::thread::sleep(due - now);
            }
        }
        self.now = t;
    }
}

impl Default for SimClock {
    fn default() -> Self {
        Self::new(0.0)
    }
}
