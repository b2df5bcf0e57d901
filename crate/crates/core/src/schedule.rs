//! Learning-rate schedules `alpha_t = base_alpha * eta_t`.

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScheduleKind {
    Constant,
    /// Linear ramp from `start_eta` at `t = 1` to `1` at `t = warmup_steps`.
    LinearWarmup {
        warmup_steps: usize,
        start_eta: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Schedule {
    pub base_alpha: f64,
    pub kind: ScheduleKind,
}

impl Schedule {
    pub fn constant(base_alpha: f64) -> Self {
        assert!(
            base_alpha > 0.0,
            "base learning rate must be positive, got {base_alpha}"
        );
        Self {
            base_alpha,
            kind: ScheduleKind::Constant,
        }
    }

    pub fn linear_warmup(base_alpha: f64, warmup_steps: usize, start_eta: f64) -> Self {
        assert!(
            base_alpha > 0.0,
            "base learning rate must be positive, got {base_alpha}"
        );
        assert!(warmup_steps >= 1 && start_eta > 0.0);
        Self {
            base_alpha,
            kind: ScheduleKind::LinearWarmup {
                warmup_steps,
                start_eta,
            },
        }
    }

    /// `eta_t` for the 1-based step index `t`.
    pub fn multiplier(&self, t: usize) -> f64 {
        debug_assert!(t >= 1);
        match self.kind {
            ScheduleKind::Constant => 1.0,
            ScheduleKind::LinearWarmup {
                warmup_steps,
                start_eta,
            } => {
                if t >= warmup_steps || warmup_steps == 1 {
                    1.0
                } else {
                    let frac = (t.max(1) - 1) as f64 / (warmup_steps - 1) as f64;
                    start_eta + (1.0 - start_eta) * frac
                }
            }
        }
    }

    pub fn alpha(&self, t: usize) -> f64 {
        self.base_alpha * self.multiplier(t)
    }
}
