/// Linear interpolation from `start` to `end` over `duration` ticks, then
/// constant at `end`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearSchedule {
    pub start: f64,
    pub end: f64,
    pub duration: u64,
}

impl LinearSchedule {
    pub fn new(start: f64, end: f64, duration: u64) -> Self {
        Self { start, end, duration }
    }

    pub fn constant(value: f64) -> Self {
        Self::new(value, value, 0)
    }

    pub fn value(&self, t: u64) -> f64 {
        if self.duration == 0 || t >= self.duration {
            return self.end;
        }
        let frac = t as f64 / self.duration as f64;
        self.start + (self.end - self.start) * frac
    }
}
