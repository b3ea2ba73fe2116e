use rand::Rng;

use super::Trajectory;

/// Ring of complete episodes.
#[derive(Clone, Debug)]
pub struct ReplayBuffer {
    capacity: usize,
    episodes: Vec<Trajectory>,
    next: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        Self {
            capacity,
            episodes: Vec::new(),
            next: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.episodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.episodes.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Overwrites the oldest episode once full.
    pub fn push(&mut self, t: Trajectory) {
        if self.episodes.len() < self.capacity {
            self.episodes.push(t);
        } else {
            self.episodes[self.next] = t;
        }
        self.next = (self.next + 1) % self.capacity;
    }

    /// Uniform draw with replacement.
    pub fn sample<R: Rng + ?Sized>(&self, batch: usize, rng: &mut R) -> Vec<&Trajectory> {
        if self.episodes.is_empty() {
            return vec![];
        }
        (0..batch).map(|_| &self.episodes[rng.gen_range(0..self.episodes.len())]).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rl::Step;

    fn traj(r: f64) -> Trajectory {
        Trajectory::new(vec![Step {
            observation: vec![0.0],
            action: 0,
            reward: r,
            done: true,
        }])
        .unwrap()
    }

    #[test]
    fn never_exceeds_capacity_and_drops_oldest() {
        let mut b = ReplayBuffer::new(3);
        for i in 0..5 {
            b.push(traj(i as f64));
        }
        assert_eq!(b.len(), 3);
        let mut rewards: Vec<f64> = b.episodes.iter().map(|t| t.final_reward()).collect();
        rewards.sort_by(f64::total_cmp);
        assert_eq!(rewards, vec![2.0, 3.0, 4.0]);
    }

    #[test]
    fn samples_are_complete_episodes() {
        let mut b = ReplayBuffer::new(4);
        b.push(traj(1.0));
        let mut rng = crate::rng::seeded(0);
        for t in b.sample(10, &mut rng) {
            assert!(t.steps().last().unwrap().done);
        }
    }
}
