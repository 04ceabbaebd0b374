//! Fluid processor-sharing host model.
//!
//! Each active request demands CPU at its own rate; when the demanded sum
//! exceeds capacity every request is throttled proportionally. Instantaneous
//! utilization is min(1, demanded/capacity), which makes offered load
//! analytically predictable: a deterministic arrival stream of rate λ and
//! demand d settles at utilization λ·d/C.

use crate::model::TimeMs;

const EPS: f64 = 1e-9;

#[derive(Debug, Clone)]
struct Job {
    id: u64,
    remaining: f64,
    rate: f64,
}

#[derive(Debug, Clone)]
pub struct HostSim {
    pub id: String,
    pub capacity: f64,
    jobs: Vec<Job>,
    last_advance: TimeMs,
    /// Bumped on every membership change; stale completion events carry an
    /// older epoch and are ignored.
    pub epoch: u64,
}

impl HostSim {
    pub fn new(id: impl Into<String>, capacity: f64) -> Self {
        assert!(capacity > 0.0, "capacity must be positive");
        HostSim {
            id: id.into(),
            capacity,
            jobs: Vec::new(),
            last_advance: TimeMs(0),
            epoch: 0,
        }
    }

    pub fn job_count(&self) -> usize {
        self.jobs.len()
    }

    pub fn is_idle(&self) -> bool {
        self.jobs.is_empty()
    }

    fn demanded(&self) -> f64 {
        self.jobs.iter().map(|j| j.rate).sum()
    }

    /// min(1, Σ demand rate / capacity), the value host monitors report.
    pub fn utilization(&self) -> f64 {
        (self.demanded() / self.capacity).min(1.0)
    }

    fn throttle(&self) -> f64 {
        let demanded = self.demanded();
        if demanded <= self.capacity {
            1.0
        } else {
            self.capacity / demanded
        }
    }

    /// Accrues progress on all jobs up to `t`.
    pub fn advance_to(&mut self, t: TimeMs) {
        debug_assert!(t >= self.last_advance, "time went backwards");
        if t == self.last_advance || self.jobs.is_empty() {
            self.last_advance = t;
            return;
        }
        let dt_s = (t.0 - self.last_advance.0) as f64 / 1_000.0;
        let throttle = self.throttle();
        for job in &mut self.jobs {
            job.remaining -= job.rate * throttle * dt_s;
        }
        self.last_advance = t;
    }

    /// Adds a job demanding `rate` units/s until `demand` units complete.
    /// A rate at or above capacity models a CPU-hungry request that takes
    /// the whole host when alone.
    pub fn add_job(&mut self, now: TimeMs, id: u64, demand: f64, rate: f64) {
        assert!(demand > 0.0 && rate > 0.0);
        self.advance_to(now);
        self.jobs.push(Job {
            id,
            remaining: demand,
            rate,
        });
        self.epoch += 1;
    }

    /// Earliest completion instant among current jobs, rounded up to the
    /// next millisecond.
    pub fn next_completion(&self) -> Option<TimeMs> {
        if self.jobs.is_empty() {
            return None;
        }
        let throttle = self.throttle();
        let secs = self
            .jobs
            .iter()
            .map(|j| (j.remaining.max(0.0)) / (j.rate * throttle))
            .fold(f64::INFINITY, f64::min);
        Some(TimeMs(self.last_advance.0 + (secs * 1_000.0).ceil() as u64))
    }

    /// Advances to `now` and removes every finished job, lowest id first.
    pub fn complete_ready(&mut self, now: TimeMs) -> Vec<u64> {
        self.advance_to(now);
        let mut done: Vec<u64> = self
            .jobs
            .iter()
            .filter(|j| j.remaining <= EPS)
            .map(|j| j.id)
            .collect();
        done.sort_unstable();
        if !done.is_empty() {
            self.jobs.retain(|j| j.remaining > EPS);
            self.epoch += 1;
        }
        done
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_request_takes_demand_over_capacity() {
        // demand 2 units on a 4 units/s host: 0.5s
        let mut host = HostSim::new("h", 4.0);
        host.add_job(TimeMs(0), 1, 2.0, 4.0);
        assert_eq!(host.next_completion(), Some(TimeMs(500)));
        assert_eq!(host.complete_ready(TimeMs(500)), vec![1]);
        assert!(host.is_idle());
    }

    #[test]
    fn two_identical_requests_take_twice_as_long() {
        let mut host = HostSim::new("h", 4.0);
        host.add_job(TimeMs(0), 1, 2.0, 4.0);
        host.add_job(TimeMs(0), 2, 2.0, 4.0);
        assert_eq!(host.next_completion(), Some(TimeMs(1_000)));
        assert_eq!(host.complete_ready(TimeMs(1_000)), vec![1, 2]);
    }

    #[test]
    fn utilization_tracks_demand_rates() {
        let mut host = HostSim::new("h", 2.0);
        assert_eq!(host.utilization(), 0.0);
        host.add_job(TimeMs(0), 1, 0.3, 0.1);
        assert!((host.utilization() - 0.05).abs() < 1e-12);
        for i in 2..=18 {
            host.add_job(TimeMs(0), i, 0.3, 0.1);
        }
        assert!((host.utilization() - 0.9).abs() < 1e-12);
        // oversubscription clamps at 1
        for i in 19..=40 {
            host.add_job(TimeMs(0), i, 0.3, 0.1);
        }
        assert_eq!(host.utilization(), 1.0);
    }

    #[test]
    fn staggered_arrivals_match_fine_step_integrator() {
        // event-driven completions against a brute-force fluid integration
        let arrivals: [(u64, f64, f64); 4] = [
            (0, 1.0, 2.0),
            (200, 0.8, 1.5),
            (450, 2.0, 4.0),
            (700, 0.5, 0.7),
        ];
        let capacity = 3.0;

        // oracle: dt = 0.1ms explicit integration
        let mut oracle_jobs: Vec<(u64, f64, f64, u64)> = Vec::new(); // id, remaining, rate, t_done_ms
        let mut completions_oracle: Vec<(u64, u64)> = Vec::new();
        let dt = 0.0001;
        let mut t = 0.0f64;
        let mut next_arrival = 0usize;
        while completions_oracle.len() < arrivals.len() {
            while next_arrival < arrivals.len()
                && arrivals[next_arrival].0 as f64 / 1_000.0 <= t + 1e-12
            {
                let (at, demand, rate) = arrivals[next_arrival];
                oracle_jobs.push((at, demand, rate, 0));
                next_arrival += 1;
            }
            let demanded: f64 = oracle_jobs.iter().map(|j| j.2).sum();
            let throttle = if demanded <= capacity { 1.0 } else { capacity / demanded };
            for job in &mut oracle_jobs {
                job.1 -= job.2 * throttle * dt;
            }
            t += dt;
            oracle_jobs.retain(|j| {
                if j.1 <= 0.0 {
                    completions_oracle.push((j.0, (t * 1_000.0) as u64));
                    false
                } else {
                    true
                }
            });
        }

        // event-driven run
        let mut host = HostSim::new("h", capacity);
        let mut completions: Vec<(u64, u64)> = Vec::new();
        let mut pending: Vec<(u64, f64, f64)> = arrivals.to_vec();
        while completions.len() < arrivals.len() {
            let next_arr = pending.first().map(|a| TimeMs(a.0));
            let next_done = host.next_completion();
            let next = match (next_arr, next_done) {
                (Some(a), Some(d)) => a.min(d),
                (Some(a), None) => a,
                (None, Some(d)) => d,
                (None, None) => break,
            };
            if Some(next) == next_arr {
                let (at, demand, rate) = pending.remove(0);
                host.add_job(TimeMs(at), at, demand, rate);
            } else {
                for id in host.complete_ready(next) {
                    completions.push((id, next.0));
                }
            }
        }

        completions.sort();
        completions_oracle.sort();
        assert_eq!(completions.len(), completions_oracle.len());
        for ((id_a, t_a), (id_b, t_b)) in completions.iter().zip(&completions_oracle) {
            assert_eq!(id_a, id_b);
            let diff = (*t_a as i64 - *t_b as i64).abs();
            assert!(diff <= 2, "job {id_a}: event {t_a}ms vs integrator {t_b}ms");
        }
    }

    #[test]
    fn stale_epoch_detection() {
        let mut host = HostSim::new("h", 1.0);
        host.add_job(TimeMs(0), 1, 1.0, 1.0);
        let epoch = host.epoch;
        host.add_job(TimeMs(100), 2, 1.0, 1.0);
        assert_ne!(host.epoch, epoch);
    }
}
