//! Feature map for (world, query) pairs.
//!
//! Layout for `n` attributes, `3n + 3` entries:
//!
//! * `[0, n)` world attribute bits as 0/1;
//! * `[n, 3n)` two slots per attribute index, positive then negated literal.
//!   A slot is non-zero only when the query mentions that literal, and then
//!   holds +1 if the literal is true in the world and -1 otherwise;
//! * `[3n, 3n + 3)` connective one-hot: single literal, conjunction,
//!   disjunction.
//!
//! Dropout zeroes each entry independently. Its mask is keyed by the
//! dataset seed and the (world, query) ids, so it is fixed per dataset.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::synth::{Formula, Literal, Query, World};

pub fn feature_len(n_attr: usize) -> usize {
    3 * n_attr + 3
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dropout {
    pub rate: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Featurizer {
    pub n_attr: usize,
    pub dropout: Option<Dropout>,
}

impl Featurizer {
    pub fn new(n_attr: usize) -> Self {
        Self {
            n_attr,
            dropout: None,
        }
    }

    pub fn with_dropout(mut self, rate: f64, seed: u64) -> Self {
        self.dropout = (rate > 0.0).then_some(Dropout { rate, seed });
        self
    }

    pub fn len(&self) -> usize {
        feature_len(self.n_attr)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn featurize(&self, world: &World, query: &Query) -> Vec<f64> {
        let n = self.n_attr;
        let mut x = vec![0.0; feature_len(n)];
        for (k, &bit) in world.attributes.iter().take(n).enumerate() {
            x[k] = f64::from(u8::from(bit));
        }
        let mut set_literal = |l: Literal| {
            let slot = n + 2 * l.attr + usize::from(l.neg);
            x[slot] = if l.eval(&world.attributes) { 1.0 } else { -1.0 };
        };
        let connective = match query.formula {
            Formula::Lit { lit } => {
                set_literal(lit);
                0
            }
            Formula::And { a, b } => {
                set_literal(a);
                set_literal(b);
                1
            }
            Formula::Or { a, b } => {
                set_literal(a);
                set_literal(b);
                2
            }
        };
        x[3 * n + connective] = 1.0;

        if let Some(d) = self.dropout {
            let mut rng = ChaCha8Rng::seed_from_u64(mask_seed(d.seed, world, query));
            for v in &mut x {
                if rng.gen_bool(d.rate) {
                    *v = 0.0;
                }
            }
        }
        x
    }
}

fn mask_seed(seed: u64, world: &World, query: &Query) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    for part in [world.id.as_str(), query.id.as_str()] {
        h.update((part.len() as u64).to_le_bytes());
        h.update(part.as_bytes());
    }
    let d = h.finalize();
    let mut b = [0u8; 8];
    b.copy_from_slice(&d[..8]);
    u64::from_le_bytes(b)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn world(n: usize) -> World {
        World {
            id: "w0".into(),
            attributes: vec![false; n],
        }
    }

    fn query(f: Formula) -> Query {
        Query {
            id: "w0.q0".into(),
            surface_text: f.render(),
            formula: f,
        }
    }

    #[test]
    fn layout() {
        let fz = Featurizer::new(12);
        let x = fz.featurize(&world(12), &query(Formula::lit(Literal::pos(0))));
        assert_eq!(x.len(), 12 + 2 * 12 + 3);
        // attr0 is off, so its positive-literal slot reads -1.
        let literal_block = &x[12..36];
        assert_eq!(literal_block[0], -1.0);
        assert!(literal_block[1..].iter().all(|&v| v == 0.0));
        assert!(x[..12].iter().all(|&v| v == 0.0));
        assert_eq!(&x[36..], &[1.0, 0.0, 0.0]);

        let mut w = world(4);
        w.attributes[1] = true;
        let x =
            Featurizer::new(4).featurize(&w, &query(Formula::or(Literal::neg(1), Literal::neg(3))));
        assert_eq!(
            x,
            vec![0., 1., 0., 0., 0., 0., 0., -1., 0., 0., 0., 1., 0., 0., 1.]
        );
    }

    #[test]
    fn deterministic_with_dropout() {
        let fz = Featurizer::new(12).with_dropout(0.3, 9);
        let q = query(Formula::and(Literal::pos(2), Literal::neg(7)));
        let mut w = world(12);
        w.attributes.iter_mut().step_by(2).for_each(|b| *b = true);
        assert_eq!(fz.featurize(&w, &q), fz.featurize(&w, &q));

        // Over many ids roughly 30% of the attribute block is dropped.
        let mut kept = 0usize;
        let mut total = 0usize;
        for i in 0..400 {
            let mut q = q.clone();
            q.id = format!("w0.q{i}").into();
            let x = fz.featurize(&w, &q);
            kept += x[..12].iter().step_by(2).filter(|&&v| v == 1.0).count();
            total += 6;
        }
        let rate = 1.0 - kept as f64 / total as f64;
        assert!((rate - 0.3).abs() < 0.03, "{rate}");
    }
}
