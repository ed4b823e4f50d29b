use num_complex::Complex64 as C64;

use crate::tensor::{gather, matmul, matmul_nt, matmul_tn, Index, PairLayout};

use super::{ContractionPlan, NetworkShape, PlanError};

/// A plan lowered to fixed gather maps and matrix shapes, so the same network
/// can be contracted for many leaf values without re-deriving layouts.
///
/// [`Program::backward`] walks the tree in reverse: for a merge `C = A B` the
/// cotangent of `A` is `dC B^T` and that of `B` is `A^T dC`, which yields the
/// environment of every leaf in one pass.
#[derive(Clone, Debug)]
pub struct Program {
    leaves: Vec<Vec<Index>>,
    steps: Vec<CompiledStep>,
    output: Vec<Index>,
}

#[derive(Clone, Debug)]
struct CompiledStep {
    a: usize,
    b: usize,
    layout: PairLayout,
}

/// Saved operands of a forward pass.
pub struct Forward {
    mats: Vec<(Vec<C64>, Vec<C64>)>,
    value: Vec<C64>,
}

impl Forward {
    pub fn value(&self) -> &[C64] {
        &self.value
    }

    pub fn scalar(&self) -> C64 {
        debug_assert_eq!(self.value.len(), 1);
        self.value[0]
    }
}

impl Program {
    pub fn compile(net: &NetworkShape, plan: &ContractionPlan) -> Result<Self, PlanError> {
        plan.validate(net.len())?;
        let mut labels: Vec<Vec<Index>> = net.nodes().to_vec();
        let mut steps = Vec::with_capacity(plan.steps.len());
        for &(a, b) in &plan.steps {
            let layout = PairLayout::new(&labels[a], &labels[b])?;
            labels.push(layout.out.clone());
            steps.push(CompiledStep { a, b, layout });
        }
        let output = labels.last().cloned().unwrap_or_default();
        Ok(Self {
            leaves: net.nodes().to_vec(),
            steps,
            output,
        })
    }

    pub fn leaf_indices(&self) -> &[Vec<Index>] {
        &self.leaves
    }

    /// Labels of the result, in storage order.
    pub fn output_indices(&self) -> &[Index] {
        &self.output
    }

    pub fn flops(&self) -> usize {
        self.steps.iter().map(|s| s.layout.flops()).sum()
    }

    pub fn forward(&self, leaves: &[&[C64]]) -> Forward {
        assert_eq!(leaves.len(), self.leaves.len(), "leaf count");
        if self.steps.is_empty() {
            return Forward {
                mats: Vec::new(),
                value: leaves[0].to_vec(),
            };
        }
        let n = leaves.len();
        let mut inter: Vec<Option<Vec<C64>>> = vec![None; self.steps.len()];
        let mut mats = Vec::with_capacity(self.steps.len());
        for (s, step) in self.steps.iter().enumerate() {
            let am = {
                let src: &[C64] = if step.a < n {
                    leaves[step.a]
                } else {
                    inter[step.a - n].as_deref().unwrap()
                };
                gather(src, &step.layout.gather_a)
            };
            let bm = {
                let src: &[C64] = if step.b < n {
                    leaves[step.b]
                } else {
                    inter[step.b - n].as_deref().unwrap()
                };
                gather(src, &step.layout.gather_b)
            };
            if step.a >= n {
                inter[step.a - n] = None;
            }
            if step.b >= n {
                inter[step.b - n] = None;
            }
            let l = &step.layout;
            inter[s] = Some(matmul(&am, &bm, l.m, l.k, l.n));
            mats.push((am, bm));
        }
        let value = inter.pop().flatten().expect("final step output");
        Forward { mats, value }
    }

    /// Derivatives of `<out_grad, result>` with respect to every leaf entry
    /// (holomorphic, no conjugation), each in its leaf's layout.
    pub fn backward(&self, fwd: &Forward, out_grad: &[C64]) -> Vec<Vec<C64>> {
        let n = self.leaves.len();
        if self.steps.is_empty() {
            return vec![out_grad.to_vec()];
        }
        let mut grads: Vec<Option<Vec<C64>>> = vec![None; n + self.steps.len()];
        grads[n + self.steps.len() - 1] = Some(out_grad.to_vec());
        for (s, step) in self.steps.iter().enumerate().rev() {
            let g = grads[n + s].take().expect("cotangent flows to every node");
            let (am, bm) = &fwd.mats[s];
            let l = &step.layout;
            let ga = matmul_nt(&g, bm, l.m, l.k, l.n);
            let gb = matmul_tn(am, &g, l.m, l.k, l.n);
            grads[step.a] = Some(scatter(&ga, &l.gather_a));
            grads[step.b] = Some(scatter(&gb, &l.gather_b));
        }
        grads.truncate(n);
        grads
            .into_iter()
            .map(|g| g.expect("leaf cotangent"))
            .collect()
    }
}

fn scatter(src: &[C64], map: &[usize]) -> Vec<C64> {
    let mut out = vec![C64::new(0.0, 0.0); src.len()];
    for (v, &g) in src.iter().zip(map) {
        out[g] = *v;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::planner::{execute_plan, plan_optimal, TensorNetwork};
    use crate::tensor::Tensor;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(indices: Vec<Index>, rng: &mut ChaCha8Rng) -> Tensor {
        Tensor::from_fn(indices, |_| {
            C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        })
        .unwrap()
    }

    fn triangle(rng: &mut ChaCha8Rng) -> TensorNetwork {
        let a = random(vec![Index::new("x", 2), Index::new("y", 3)], rng);
        let b = random(
            vec![Index::new("y", 3), Index::new("z", 2), Index::new("o", 2)],
            rng,
        );
        let c = random(vec![Index::new("z", 2), Index::new("x", 2)], rng);
        TensorNetwork::new(vec![a, b, c]).unwrap()
    }

    #[test]
    fn forward_matches_execute() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let net = triangle(&mut rng);
        let plan = plan_optimal(net.shape()).unwrap();
        let prog = Program::compile(net.shape(), &plan).unwrap();
        let leaves: Vec<&[C64]> = net.tensors().iter().map(Tensor::data).collect();
        let fwd = prog.forward(&leaves);
        let direct = execute_plan(&net, &plan).unwrap();
        assert_eq!(prog.output_indices(), direct.indices());
        for (x, y) in fwd.value().iter().zip(direct.data()) {
            assert!((x - y).norm() < 1e-12);
        }
    }

    #[test]
    fn backward_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let net = triangle(&mut rng);
        let plan = plan_optimal(net.shape()).unwrap();
        let prog = Program::compile(net.shape(), &plan).unwrap();
        let weights: Vec<C64> = (0..2).map(|i| C64::new(1.0 + i as f64, -0.5)).collect();
        let f = |ts: &[Vec<C64>]| -> C64 {
            let leaves: Vec<&[C64]> = ts.iter().map(Vec::as_slice).collect();
            let fwd = prog.forward(&leaves);
            fwd.value().iter().zip(&weights).map(|(v, w)| v * w).sum()
        };
        let base: Vec<Vec<C64>> = net.tensors().iter().map(|t| t.data().to_vec()).collect();
        let leaves: Vec<&[C64]> = base.iter().map(Vec::as_slice).collect();
        let grads = prog.backward(&prog.forward(&leaves), &weights);
        // the map is linear in each leaf, so a unit perturbation is exact
        for (leaf, g) in grads.iter().enumerate() {
            for e in 0..g.len() {
                let mut bumped = base.clone();
                bumped[leaf][e] += C64::new(1.0, 0.0);
                let diff = f(&bumped) - f(&base);
                assert!((diff - g[e]).norm() < 1e-10, "leaf {leaf} entry {e}");
            }
        }
    }
}
