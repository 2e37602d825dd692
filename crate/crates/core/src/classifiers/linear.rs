use alloc::vec::Vec;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{logit_loss, sigmoid, FitInfo, Hyperparams, Params};
use crate::error::Result;
use crate::linalg::{cholesky, cholesky_solve, column_means, dot, Matrix};
use crate::rng;

/// Logistic map from a margin to a probability: `sigmoid(a * m + b)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Platt {
    pub a: f64,
    pub b: f64,
}

impl Platt {
    /// Fits `a, b` by Newton's method on the log-loss of the margins, with
    /// the usual smoothed targets `(n1 + 1) / (n1 + 2)` and `1 / (n0 + 2)`.
    pub fn fit(margins: &[f64], y: &[u8]) -> Platt {
        let n1 = y.iter().filter(|&&l| l == 1).count() as f64;
        let n0 = y.len() as f64 - n1;
        let hi = (n1 + 1.0) / (n1 + 2.0);
        let lo = 1.0 / (n0 + 2.0);
        let t: Vec<f64> = y.iter().map(|&l| if l == 1 { hi } else { lo }).collect();
        let objective = |a: f64, b: f64| -> f64 {
            margins
                .iter()
                .zip(&t)
                .map(|(&m, &t)| {
                    let z = a * m + b;
                    t * super::softplus(-z) + (1.0 - t) * super::softplus(z)
                })
                .sum()
        };
        let (mut a, mut b) = (1.0, 0.0);
        let mut f = objective(a, b);
        for _ in 0..100 {
            let (mut ga, mut gb, mut haa, mut hab, mut hbb) = (0.0, 0.0, 1e-12, 0.0, 1e-12);
            for (&m, &t) in margins.iter().zip(&t) {
                let p = sigmoid(a * m + b);
                let d = p - t;
                let w = p * (1.0 - p);
                ga += d * m;
                gb += d;
                haa += w * m * m;
                hab += w * m;
                hbb += w;
            }
            let det = haa * hbb - hab * hab;
            if det <= 0.0 || (ga.abs() < 1e-10 && gb.abs() < 1e-10) {
                break;
            }
            let da = -(hbb * ga - hab * gb) / det;
            let db = -(haa * gb - hab * ga) / det;
            let mut step = 1.0;
            let mut improved = false;
            while step > 1e-10 {
                let (na, nb) = (a + step * da, b + step * db);
                let nf = objective(na, nb);
                if nf < f {
                    (a, b, f) = (na, nb, nf);
                    improved = true;
                    break;
                }
                step *= 0.5;
            }
            if !improved {
                break;
            }
        }
        Platt { a, b }
    }

    pub fn apply(&self, margin: f64) -> f64 {
        sigmoid(self.a * margin + self.b)
    }
}

/// Linear decision function `w . x + b`. Without a Platt map the score is
/// `sigmoid(w . x + b)` (logistic regression).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Linear {
    pub w: Vec<f64>,
    pub b: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub platt: Option<Platt>,
}

impl Linear {
    pub fn margin(&self, x: &[f64]) -> f64 {
        dot(&self.w, x) + self.b
    }

    pub fn score(&self, x: &[f64]) -> f64 {
        let m = self.margin(x);
        match &self.platt {
            Some(p) => p.apply(m),
            None => sigmoid(m),
        }
    }

    fn margins(&self, x: &Matrix) -> Vec<f64> {
        x.iter_rows().map(|r| self.margin(r)).collect()
    }
}

/// Full-batch gradient descent on mean log-loss plus `lambda / 2 * |w|^2`.
pub(super) fn fit_logistic(x: &Matrix, y: &[u8], h: &Hyperparams) -> (Params, FitInfo) {
    let lr = h.learning_rate.unwrap_or(0.5);
    let epochs = h.epochs.unwrap_or(300);
    let lambda = h.lambda.unwrap_or(1e-4);
    let (n, d) = (x.rows() as f64, x.cols());
    let mut m = Linear {
        w: alloc::vec![0.0; d],
        b: 0.0,
        platt: None,
    };
    let mut trace = Vec::with_capacity(epochs);
    let mut gw = alloc::vec![0.0; d];
    for _ in 0..epochs {
        gw.iter_mut().for_each(|g| *g = 0.0);
        let mut gb = 0.0;
        for (r, &l) in x.iter_rows().zip(y) {
            let e = sigmoid(m.margin(r)) - f64::from(l);
            gw.iter_mut().zip(r).for_each(|(g, xi)| *g += e * xi);
            gb += e;
        }
        for (w, g) in m.w.iter_mut().zip(&gw) {
            *w -= lr * (g / n + lambda * *w);
        }
        m.b -= lr * gb / n;
        trace.push(logit_loss(&m.margins(x), y) + 0.5 * lambda * dot(&m.w, &m.w));
    }
    let info = FitInfo {
        iterations: epochs,
        final_loss: trace.last().copied(),
        loss_trace: trace,
    };
    (Params::Linear(m), info)
}

/// Least squares on `+-1` targets with an unpenalized intercept, then a
/// Platt map on the training margins.
pub(super) fn fit_ridge(x: &Matrix, y: &[u8], h: &Hyperparams) -> Result<(Params, FitInfo)> {
    let lambda = h.lambda.unwrap_or(1.0);
    let d = x.cols();
    let mu = column_means(x);
    let t: Vec<f64> = y.iter().map(|&l| if l == 1 { 1.0 } else { -1.0 }).collect();
    let t_mean = t.iter().sum::<f64>() / t.len() as f64;
    let mut a = Matrix::zeros(d, d);
    let mut rhs = alloc::vec![0.0; d];
    let mut c = alloc::vec![0.0; d];
    for (r, &ti) in x.iter_rows().zip(&t) {
        c.iter_mut().zip(r.iter().zip(&mu)).for_each(|(c, (v, m))| *c = v - m);
        for i in 0..d {
            rhs[i] += c[i] * (ti - t_mean);
            for j in 0..=i {
                a[(i, j)] += c[i] * c[j];
            }
        }
    }
    for i in 0..d {
        a[(i, i)] += lambda;
        for j in 0..i {
            a[(j, i)] = a[(i, j)];
        }
    }
    let w = cholesky_solve(&cholesky(&a)?, &rhs);
    let b = t_mean - dot(&w, &mu);
    let mut m = Linear { w, b, platt: None };
    let margins = m.margins(x);
    let sse: f64 = margins.iter().zip(&t).map(|(p, t)| (p - t) * (p - t)).sum();
    m.platt = Some(Platt::fit(&margins, y));
    let info = FitInfo {
        iterations: 1,
        final_loss: Some(sse / t.len() as f64 + lambda * dot(&m.w, &m.w) / t.len() as f64),
        loss_trace: Vec::new(),
    };
    Ok((Params::Linear(m), info))
}

#[derive(Clone, Copy, Debug)]
pub(super) enum Loss {
    Hinge,
    ModifiedHuber,
}

impl Loss {
    /// Loss and its derivative with respect to the signed margin.
    fn eval(self, m: f64) -> (f64, f64) {
        match self {
            Loss::Hinge if m < 1.0 => (1.0 - m, -1.0),
            Loss::Hinge => (0.0, 0.0),
            Loss::ModifiedHuber if m >= 1.0 => (0.0, 0.0),
            Loss::ModifiedHuber if m >= -1.0 => ((1.0 - m) * (1.0 - m), -2.0 * (1.0 - m)),
            Loss::ModifiedHuber => (-4.0 * m, -4.0),
        }
    }
}

/// Stochastic subgradient descent on `loss + lambda / 2 * |w|^2` with the
/// decaying step `eta0 / (1 + eta0 * lambda * t)`, one shuffled pass per
/// epoch, then a Platt map on the training margins.
pub(super) fn fit_sgd(x: &Matrix, y: &[u8], h: &Hyperparams, loss: Loss, seed: u64) -> (Params, FitInfo) {
    let eta0 = h.learning_rate.unwrap_or(0.1);
    let epochs = h.epochs.unwrap_or(20);
    let lambda = h.lambda.unwrap_or(match loss {
        Loss::Hinge => 1e-3,
        Loss::ModifiedHuber => 1e-4,
    });
    let mut g = rng::seeded(seed, 0x5D);
    let mut m = Linear {
        w: alloc::vec![0.0; x.cols()],
        b: 0.0,
        platt: None,
    };
    let sign = |l: u8| if l == 1 { 1.0 } else { -1.0 };
    let mut order: Vec<usize> = (0..x.rows()).collect();
    let mut trace = Vec::with_capacity(epochs);
    let mut t = 0.0;
    for _ in 0..epochs {
        order.shuffle(&mut g);
        for &i in &order {
            let eta = eta0 / (1.0 + eta0 * lambda * t);
            t += 1.0;
            let s = sign(y[i]);
            let r = x.row(i);
            let (_, dl) = loss.eval(s * m.margin(r));
            let shrink = 1.0 - eta * lambda;
            for (w, xi) in m.w.iter_mut().zip(r) {
                *w = shrink * *w - eta * dl * s * xi;
            }
            m.b -= eta * dl * s;
        }
        let total: f64 = x
            .iter_rows()
            .zip(y)
            .map(|(r, &l)| loss.eval(sign(l) * m.margin(r)).0)
            .sum();
        trace.push(total / x.rows() as f64 + 0.5 * lambda * dot(&m.w, &m.w));
    }
    let margins = m.margins(x);
    m.platt = Some(Platt::fit(&margins, y));
    let info = FitInfo {
        iterations: epochs,
        final_loss: trace.last().copied(),
        loss_trace: trace,
    };
    (Params::Linear(m), info)
}
