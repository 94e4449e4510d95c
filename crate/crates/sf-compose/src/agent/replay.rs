//! Uniform-replay ring buffer of environment transitions.

use rand::Rng;

use crate::sflearn::TransitionBatch;

/// FIFO ring of `(obs, action, φ, next_obs, done)` tuples in flat
/// struct-of-arrays layout. Sampling is uniform over the filled region.
pub struct ReplayBuffer {
    capacity: usize,
    obs_dim: usize,
    act_dim: usize,
    feat_dim: usize,
    obs: Vec<f32>,
    act: Vec<f32>,
    phi: Vec<f32>,
    next_obs: Vec<f32>,
    done: Vec<bool>,
    len: usize,
    head: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize, obs_dim: usize, act_dim: usize, feat_dim: usize) -> Self {
        assert!(capacity > 0, "capacity must be > 0");
        ReplayBuffer {
            capacity,
            obs_dim,
            act_dim,
            feat_dim,
            obs: vec![0.0; capacity * obs_dim],
            act: vec![0.0; capacity * act_dim],
            phi: vec![0.0; capacity * feat_dim],
            next_obs: vec![0.0; capacity * obs_dim],
            done: vec![false; capacity],
            len: 0,
            head: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn push(&mut self, obs: &[f32], act: &[f32], phi: &[f32], next_obs: &[f32], done: bool) {
        assert_eq!(obs.len(), self.obs_dim);
        assert_eq!(act.len(), self.act_dim);
        assert_eq!(phi.len(), self.feat_dim);
        assert_eq!(next_obs.len(), self.obs_dim);
        let i = self.head;
        self.obs[i * self.obs_dim..(i + 1) * self.obs_dim].copy_from_slice(obs);
        self.act[i * self.act_dim..(i + 1) * self.act_dim].copy_from_slice(act);
        self.phi[i * self.feat_dim..(i + 1) * self.feat_dim].copy_from_slice(phi);
        self.next_obs[i * self.obs_dim..(i + 1) * self.obs_dim].copy_from_slice(next_obs);
        self.done[i] = done;
        self.head = (self.head + 1) % self.capacity;
        self.len = (self.len + 1).min(self.capacity);
    }

    /// Uniform sample of `batch` transitions. `project_w` replaces the
    /// feature column by the scalar reward `φᵀw` (the SAC reduction).
    pub fn sample<R: Rng>(
        &self,
        batch: usize,
        project_w: Option<&[f32]>,
        rng: &mut R,
    ) -> TransitionBatch<f32> {
        assert!(self.len > 0, "sampling from an empty buffer");
        let out_d = match project_w {
            Some(w) => {
                assert_eq!(w.len(), self.feat_dim, "projection weight length");
                1
            }
            None => self.feat_dim,
        };
        let mut b = TransitionBatch {
            obs: vec![0.0; batch * self.obs_dim],
            act: vec![0.0; batch * self.act_dim],
            phi: vec![0.0; batch * out_d],
            next_obs: vec![0.0; batch * self.obs_dim],
            batch,
        };
        for j in 0..batch {
            let i = rng.gen_range(0..self.len);
            b.obs[j * self.obs_dim..(j + 1) * self.obs_dim]
                .copy_from_slice(&self.obs[i * self.obs_dim..(i + 1) * self.obs_dim]);
            b.act[j * self.act_dim..(j + 1) * self.act_dim]
                .copy_from_slice(&self.act[i * self.act_dim..(i + 1) * self.act_dim]);
            b.next_obs[j * self.obs_dim..(j + 1) * self.obs_dim]
                .copy_from_slice(&self.next_obs[i * self.obs_dim..(i + 1) * self.obs_dim]);
            match project_w {
                Some(w) => {
                    b.phi[j] =
                        crate::envs::reward(&self.phi[i * self.feat_dim..(i + 1) * self.feat_dim], w);
                }
                None => {
                    b.phi[j * self.feat_dim..(j + 1) * self.feat_dim]
                        .copy_from_slice(&self.phi[i * self.feat_dim..(i + 1) * self.feat_dim]);
                }
            }
        }
        b
    }

    /// All filled transitions in insertion order (oldest first); full
    /// coverage for round-trip tests.
    pub fn iter_filled(&self) -> impl Iterator<Item = (Vec<f32>, Vec<f32>, Vec<f32>, Vec<f32>, bool)> + '_ {
        let start = if self.len < self.capacity {
            0
        } else {
            self.head
        };
        (0..self.len).map(move |j| {
            let i = (start + j) % self.capacity;
            (
                self.obs[i * self.obs_dim..(i + 1) * self.obs_dim].to_vec(),
                self.act[i * self.act_dim..(i + 1) * self.act_dim].to_vec(),
                self.phi[i * self.feat_dim..(i + 1) * self.feat_dim].to_vec(),
                self.next_obs[i * self.obs_dim..(i + 1) * self.obs_dim].to_vec(),
                self.done[i],
            )
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tr(k: usize) -> (Vec<f32>, Vec<f32>, Vec<f32>, Vec<f32>, bool) {
        let v = k as f32;
        (
            vec![v, v + 0.5],
            vec![-v],
            vec![v * 2.0],
            vec![v + 1.0, v + 1.5],
            k % 3 == 0,
        )
    }

    #[test]
    fn round_trip_recovers_pushed_multiset() {
        let mut buf = ReplayBuffer::new(16, 2, 1, 1);
        for k in 0..10 {
            let (o, a, p, n, d) = tr(k);
            buf.push(&o, &a, &p, &n, d);
        }
        assert_eq!(buf.len(), 10);
        let all: Vec<_> = buf.iter_filled().collect();
        for (k, got) in all.iter().enumerate() {
            assert_eq!(*got, tr(k));
        }
    }

    #[test]
    fn fifo_eviction_at_capacity() {
        let mut buf = ReplayBuffer::new(4, 2, 1, 1);
        for k in 0..7 {
            let (o, a, p, n, d) = tr(k);
            buf.push(&o, &a, &p, &n, d);
        }
        assert_eq!(buf.len(), 4);
        let all: Vec<_> = buf.iter_filled().collect();
        // Oldest remaining transition is k=3.
        for (j, got) in all.iter().enumerate() {
            assert_eq!(*got, tr(3 + j));
        }
    }

    #[test]
    fn sampling_stays_in_filled_region() {
        let mut buf = ReplayBuffer::new(100, 2, 1, 1);
        for k in 0..5 {
            let (o, a, p, n, d) = tr(k);
            buf.push(&o, &a, &p, &n, d);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let b = buf.sample(256, None, &mut rng);
        for j in 0..256 {
            let k = b.obs[j * 2] as usize;
            assert!(k < 5);
            assert_eq!(b.obs[j * 2 + 1], k as f32 + 0.5);
        }
    }

    #[test]
    fn projection_replaces_features_with_scalar_reward() {
        let mut buf = ReplayBuffer::new(8, 1, 1, 3);
        buf.push(&[0.0], &[0.0], &[1.0, -2.0, 0.5], &[0.0], false);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let b = buf.sample(4, Some(&[1.0, 1.0, 10.0]), &mut rng);
        for j in 0..4 {
            assert_eq!(b.phi[j], 1.0 - 2.0 + 5.0);
        }
    }
}
