//! Seeded random test networks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::network::{Base, Bus, Case, Line, Network};

#[derive(Debug, Clone, Copy)]
pub struct RandomSpec {
    pub n_buses: usize,
    /// Probability of each non-tree pair becoming a line.
    pub extra_line_prob: f64,
    /// Every line gets resistance 0.1 Ω instead of a random one.
    pub uniform_r: bool,
    /// Demands drawn from `[min_kw, max_kw]` (reactive at half that range).
    pub min_kw: f64,
    pub max_kw: f64,
}

impl Default for RandomSpec {
    fn default() -> Self {
        RandomSpec { n_buses: 6, extra_line_prob: 0.4, uniform_r: false, min_kw: 0.0, max_kw: 100.0 }
    }
}

/// A connected network: a random tree on buses `0..n` plus random chords.
pub fn random_network(spec: &RandomSpec, seed: u64) -> Network {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = spec.n_buses.max(2);
    let mut pairs = Vec::new();
    for v in 1..n {
        pairs.push((rng.gen_range(0..v), v));
    }
    for a in 0..n {
        for b in a + 1..n {
            if !pairs.contains(&(a, b)) && rng.gen_bool(spec.extra_line_prob) {
                pairs.push((a, b));
            }
        }
    }
    let lines = pairs
        .iter()
        .enumerate()
        .map(|(k, &(a, b))| Line {
            id: k as u32 + 1,
            from: a as u32,
            to: b as u32,
            r_ohm: if spec.uniform_r { 0.1 } else { rng.gen_range(0.05..1.0) },
            x_ohm: rng.gen_range(0.0..0.5),
        })
        .collect();
    let buses = (0..n)
        .map(|i| {
            if i == 0 {
                Bus { id: 0, p_kw: 0.0, q_kvar: 0.0 }
            } else {
                Bus {
                    id: i as u32,
                    p_kw: rng.gen_range(spec.min_kw..=spec.max_kw),
                    q_kvar: rng.gen_range(spec.min_kw..=spec.max_kw) / 2.0,
                }
            }
        })
        .collect();
    Network::from_case(Case {
        name: format!("random_{n}_{seed}"),
        source: None,
        root: 0,
        base: Base { v_kv: 12.66, s_mva: 10.0 },
        buses,
        lines,
    })
    .expect("generated network is valid")
}
