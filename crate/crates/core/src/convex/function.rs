//! Structured convex functions: affine part, weighted squares of affine forms
//! and two log families. Values, gradients and Hessians are exact.

use std::f64::consts::LN_2;

use nalgebra::DMatrix;

/// `weight * (coeffs . x + constant)^2`, `weight >= 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct SquareTerm {
    pub weight: f64,
    pub coeffs: Vec<(usize, f64)>,
    pub constant: f64,
}

/// `-weight * log2(coeffs . x + constant)`, `weight >= 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct NegLog2 {
    pub weight: f64,
    pub coeffs: Vec<(usize, f64)>,
    pub constant: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InvTerm {
    pub index: usize,
    pub numerator: f64,
    pub offset: f64,
}

/// `weight * log2(floor + sum_i numerator_i / (offset_i + x_i))` with
/// `weight, numerator >= 0` and `floor > 0`. Convex on `offset_i + x_i > 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct Log2InvSum {
    pub weight: f64,
    pub floor: f64,
    pub terms: Vec<InvTerm>,
}

fn dot(coeffs: &[(usize, f64)], x: &[f64]) -> f64 {
    coeffs.iter().map(|&(i, a)| a * x[i]).sum()
}

impl NegLog2 {
    fn arg(&self, x: &[f64]) -> f64 {
        dot(&self.coeffs, x) + self.constant
    }
}

impl Log2InvSum {
    /// Inner sum, or `None` outside the domain.
    fn inner(&self, x: &[f64]) -> Option<f64> {
        let mut total = self.floor;
        for t in &self.terms {
            let d = t.offset + x[t.index];
            if !(d > 0.0) {
                return None;
            }
            total += t.numerator / d;
        }
        Some(total)
    }
}

/// `f(x) = constant + linear . x + squares + neg_logs + inv_logs`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ConvexFunction {
    pub constant: f64,
    pub linear: Vec<(usize, f64)>,
    pub squares: Vec<SquareTerm>,
    pub neg_logs: Vec<NegLog2>,
    pub inv_logs: Vec<Log2InvSum>,
}

impl ConvexFunction {
    pub fn affine(linear: Vec<(usize, f64)>, constant: f64) -> Self {
        Self {
            constant,
            linear,
            ..Self::default()
        }
    }

    pub fn is_affine(&self) -> bool {
        self.squares.is_empty() && self.neg_logs.is_empty() && self.inv_logs.is_empty()
    }

    pub fn has_logs(&self) -> bool {
        !self.neg_logs.is_empty() || !self.inv_logs.is_empty()
    }

    /// Value, `+inf` outside the domain of a log term.
    pub fn value(&self, x: &[f64]) -> f64 {
        let mut v = self.constant + dot(&self.linear, x);
        for s in &self.squares {
            let a = dot(&s.coeffs, x) + s.constant;
            v += s.weight * a * a;
        }
        for l in &self.neg_logs {
            let a = l.arg(x);
            if !(a > 0.0) {
                return f64::INFINITY;
            }
            v -= l.weight * a.log2();
        }
        for l in &self.inv_logs {
            match l.inner(x) {
                Some(inner) => v += l.weight * inner.log2(),
                None => return f64::INFINITY,
            }
        }
        v
    }

    /// Adds `scale * grad f(x)` into `grad`. `x` must be in the domain.
    pub fn add_gradient(&self, x: &[f64], scale: f64, grad: &mut [f64]) {
        for &(i, a) in &self.linear {
            grad[i] += scale * a;
        }
        for s in &self.squares {
            let a = dot(&s.coeffs, x) + s.constant;
            let c = scale * 2.0 * s.weight * a;
            for &(i, ai) in &s.coeffs {
                grad[i] += c * ai;
            }
        }
        for l in &self.neg_logs {
            let c = -scale * l.weight / (LN_2 * l.arg(x));
            for &(i, ai) in &l.coeffs {
                grad[i] += c * ai;
            }
        }
        for l in &self.inv_logs {
            let inner = l.inner(x).unwrap_or(f64::NAN);
            let c = scale * l.weight / (LN_2 * inner);
            for t in &l.terms {
                let d = t.offset + x[t.index];
                grad[t.index] -= c * t.numerator / (d * d);
            }
        }
    }

    /// Gradient as sorted, merged `(index, value)` pairs over the support.
    pub fn sparse_gradient(&self, x: &[f64]) -> Vec<(usize, f64)> {
        let mut out: Vec<(usize, f64)> = Vec::new();
        let mut push = |i: usize, v: f64| out.push((i, v));
        for &(i, a) in &self.linear {
            push(i, a);
        }
        for s in &self.squares {
            let a = dot(&s.coeffs, x) + s.constant;
            let c = 2.0 * s.weight * a;
            for &(i, ai) in &s.coeffs {
                push(i, c * ai);
            }
        }
        for l in &self.neg_logs {
            let c = -l.weight / (LN_2 * l.arg(x));
            for &(i, ai) in &l.coeffs {
                push(i, c * ai);
            }
        }
        for l in &self.inv_logs {
            let inner = l.inner(x).unwrap_or(f64::NAN);
            let c = l.weight / (LN_2 * inner);
            for t in &l.terms {
                let d = t.offset + x[t.index];
                push(t.index, -c * t.numerator / (d * d));
            }
        }
        merge_sorted(out)
    }

    /// Adds `scale * hess f(x)` into the dense matrix `h`.
    pub fn add_hessian(&self, x: &[f64], scale: f64, h: &mut DMatrix<f64>) {
        for s in &self.squares {
            let c = scale * 2.0 * s.weight;
            for &(i, ai) in &s.coeffs {
                for &(j, aj) in &s.coeffs {
                    h[(i, j)] += c * ai * aj;
                }
            }
        }
        for l in &self.neg_logs {
            let a = l.arg(x);
            let c = scale * l.weight / (LN_2 * a * a);
            for &(i, ai) in &l.coeffs {
                for &(j, aj) in &l.coeffs {
                    h[(i, j)] += c * ai * aj;
                }
            }
        }
        for l in &self.inv_logs {
            let inner = l.inner(x).unwrap_or(f64::NAN);
            let c = scale * l.weight / LN_2;
            // d(inner)/dx_i and d2(inner)/dx_i^2 per term.
            let firsts: Vec<(usize, f64)> = l
                .terms
                .iter()
                .map(|t| {
                    let d = t.offset + x[t.index];
                    (t.index, -t.numerator / (d * d))
                })
                .collect();
            for (t, &(i, fi)) in l.terms.iter().zip(&firsts) {
                let d = t.offset + x[i];
                h[(i, i)] += c * 2.0 * t.numerator / (d * d * d) / inner;
                for &(j, fj) in &firsts {
                    h[(i, j)] -= c * fi * fj / (inner * inner);
                }
            }
        }
    }

    /// Sorted, de-duplicated variable indices the function depends on.
    pub fn support(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = self.linear.iter().map(|&(i, _)| i).collect();
        for s in &self.squares {
            idx.extend(s.coeffs.iter().map(|&(i, _)| i));
        }
        for l in &self.neg_logs {
            idx.extend(l.coeffs.iter().map(|&(i, _)| i));
        }
        for l in &self.inv_logs {
            idx.extend(l.terms.iter().map(|t| t.index));
        }
        idx.sort_unstable();
        idx.dedup();
        idx
    }

    /// Largest variable index referenced, if any.
    pub fn max_index(&self) -> Option<usize> {
        self.support().last().copied()
    }

    /// True when every coefficient is finite and every weight non-negative.
    pub fn is_well_formed(&self) -> bool {
        let fin = |c: &[(usize, f64)]| c.iter().all(|&(_, a)| a.is_finite());
        self.constant.is_finite()
            && fin(&self.linear)
            && self
                .squares
                .iter()
                .all(|s| s.weight >= 0.0 && s.weight.is_finite() && s.constant.is_finite() && fin(&s.coeffs))
            && self
                .neg_logs
                .iter()
                .all(|l| l.weight >= 0.0 && l.weight.is_finite() && l.constant.is_finite() && fin(&l.coeffs))
            && self.inv_logs.iter().all(|l| {
                l.weight >= 0.0
                    && l.weight.is_finite()
                    && l.floor > 0.0
                    && l.floor.is_finite()
                    && l.terms.iter().all(|t| {
                        t.numerator >= 0.0 && t.numerator.is_finite() && t.offset.is_finite()
                    })
            })
    }
}

fn merge_sorted(mut v: Vec<(usize, f64)>) -> Vec<(usize, f64)> {
    v.sort_by_key(|&(i, _)| i);
    let mut out: Vec<(usize, f64)> = Vec::with_capacity(v.len());
    for (i, a) in v {
        match out.last_mut() {
            Some((j, b)) if *j == i => *b += a,
            _ => out.push((i, a)),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> ConvexFunction {
        ConvexFunction {
            constant: 0.3,
            linear: vec![(0, 1.5), (2, -0.5)],
            squares: vec![SquareTerm {
                weight: 0.7,
                coeffs: vec![(0, 1.0), (1, -2.0)],
                constant: 0.1,
            }],
            neg_logs: vec![NegLog2 {
                weight: 1.2,
                coeffs: vec![(1, 0.8), (2, 0.4)],
                constant: 1.0,
            }],
            inv_logs: vec![Log2InvSum {
                weight: 0.9,
                floor: 0.5,
                terms: vec![
                    InvTerm {
                        index: 0,
                        numerator: 2.0,
                        offset: 1.0,
                    },
                    InvTerm {
                        index: 2,
                        numerator: 0.5,
                        offset: 1.5,
                    },
                ],
            }],
        }
    }

    #[test]
    fn gradient_and_hessian_match_differences() {
        let f = sample();
        let x = [0.2, 0.4, 0.3];
        let g = f.sparse_gradient(&x);
        let h_step = 1e-6;
        for &(i, gi) in &g {
            let mut xp = x;
            let mut xm = x;
            xp[i] += h_step;
            xm[i] -= h_step;
            let fd = (f.value(&xp) - f.value(&xm)) / (2.0 * h_step);
            assert!((fd - gi).abs() < 1e-7, "grad {i}: {fd} vs {gi}");
        }
        let mut h = DMatrix::zeros(3, 3);
        f.add_hessian(&x, 1.0, &mut h);
        for i in 0..3 {
            let mut xp = x;
            let mut xm = x;
            xp[i] += h_step;
            xm[i] -= h_step;
            let mut gp = [0.0; 3];
            let mut gm = [0.0; 3];
            f.add_gradient(&xp, 1.0, &mut gp);
            f.add_gradient(&xm, 1.0, &mut gm);
            for j in 0..3 {
                let fd = (gp[j] - gm[j]) / (2.0 * h_step);
                assert!((fd - h[(j, i)]).abs() < 1e-6, "hess ({j},{i}): {fd} vs {}", h[(j, i)]);
            }
        }
        // Positive semidefinite.
        let eig = h.symmetric_eigen();
        assert!(eig.eigenvalues.iter().all(|&l| l > -1e-12));
    }

    #[test]
    fn outside_domain_is_infinite() {
        let f = sample();
        assert_eq!(f.value(&[-1.0, 0.0, 0.0]), f64::INFINITY);
        assert_eq!(f.value(&[0.0, -5.0, 0.0]), f64::INFINITY);
    }

    #[test]
    fn support_is_sorted_unique() {
        assert_eq!(sample().support(), vec![0, 1, 2]);
        assert!(sample().is_well_formed());
    }
}
