use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::graph::{Graph, Var};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Init {
    Zeros,
    Constant(f64),
    /// Gaussian with the given standard deviation.
    Normal(f64),
}

/// Location of one named tensor in a flat parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamRef {
    pub offset: usize,
    pub shape: Vec<usize>,
}

impl ParamRef {
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn var<T: Real>(&self, g: &mut Graph<T>) -> Var {
        g.param(self.offset, &self.shape)
    }
}

#[derive(Debug, Clone)]
struct Entry {
    name: String,
    param: ParamRef,
    init: Init,
}

/// Ordered registry of parameter tensors. Registration order is the
/// canonical serialization order.
#[derive(Debug, Clone, Default)]
pub struct Layout {
    entries: Vec<Entry>,
    total: usize,
}

impl Layout {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, shape: &[usize], init: Init) -> ParamRef {
        let param = ParamRef {
            offset: self.total,
            shape: shape.to_vec(),
        };
        self.total += param.len();
        self.entries.push(Entry {
            name: name.into(),
            param: param.clone(),
            init,
        });
        param
    }

    /// Weight with He-normal initialization for the given fan-in.
    pub fn weight(&mut self, name: impl Into<String>, shape: &[usize], fan_in: usize) -> ParamRef {
        self.add(name, shape, Init::Normal((2.0 / fan_in.max(1) as f64).sqrt()))
    }

    pub fn total(&self) -> usize {
        self.total
    }

    pub fn names(&self) -> impl Iterator<Item = (&str, &ParamRef)> {
        self.entries.iter().map(|e| (e.name.as_str(), &e.param))
    }

    /// Draws a parameter vector in registration order.
    pub fn initialize<T: Real, R: Rng>(&self, rng: &mut R) -> Vec<T> {
        let mut out = Vec::with_capacity(self.total);
        for e in &self.entries {
            let n = e.param.len();
            match e.init {
                Init::Zeros => out.extend(std::iter::repeat_n(T::zero(), n)),
                Init::Constant(c) => out.extend(std::iter::repeat_n(T::lit(c), n)),
                Init::Normal(sd) => out.extend((0..n).map(|_| {
                    let z: f64 = StandardNormal.sample(rng);
                    T::lit(z * sd)
                })),
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn offsets_follow_registration_order() {
        let mut l = Layout::new();
        let a = l.add("a", &[2, 3], Init::Zeros);
        let b = l.add("b", &[4], Init::Constant(1.0));
        let c = l.weight("c", &[5], 5);
        assert_eq!((a.offset, b.offset, c.offset, l.total()), (0, 6, 10, 15));
        let p: Vec<f64> = l.initialize(&mut ChaCha8Rng::seed_from_u64(0));
        assert_eq!(&p[..10], &[0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 1.0]);
        let q: Vec<f64> = l.initialize(&mut ChaCha8Rng::seed_from_u64(0));
        assert_eq!(p, q);
    }
}
