use super::matrix::{dot, norm, Matrix};
use crate::error::{Error, Result};

/// Cosine similarity together with a flag telling whether either input had
/// zero norm (in which case `value` is defined as 0).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Cosine {
    pub value: f64,
    pub zero_norm: bool,
}

pub fn cosine(u: &[f64], v: &[f64]) -> Result<Cosine> {
    if u.len() != v.len() {
        return Err(Error::Shape(format!(
            "cosine of vectors with lengths {} and {}",
            u.len(),
            v.len()
        )));
    }
    let (nu, nv) = (norm(u), norm(v));
    if nu == 0.0 || nv == 0.0 {
        return Ok(Cosine {
            value: 0.0,
            zero_norm: true,
        });
    }
    let value = if u == v {
        1.0
    } else {
        (dot(u, v) / (nu * nv)).clamp(-1.0, 1.0)
    };
    Ok(Cosine {
        value,
        zero_norm: false,
    })
}

/// `exp(s_i / t) / Σ_j exp(s_j / t)`, stabilised by subtracting the maximum.
pub fn softmax(scores: &[f64], temperature: f64) -> Result<Vec<f64>> {
    if !(temperature > 0.0) || !temperature.is_finite() {
        return Err(Error::Parameter(format!(
            "softmax temperature must be positive, got {temperature}"
        )));
    }
    if let Some(bad) = scores.iter().find(|s| !s.is_finite()) {
        return Err(Error::Parameter(format!("non-finite softmax score {bad}")));
    }
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = scores
        .iter()
        .map(|&s| ((s - max) / temperature).exp())
        .collect();
    let total: f64 = out.iter().sum();
    for v in &mut out {
        *v /= total;
    }
    Ok(out)
}

/// Rows scaled to unit length, plus their original norms. Zero rows stay zero.
pub fn normalize_rows(m: &Matrix) -> (Matrix, Vec<f64>) {
    let mut out = m.clone();
    let mut norms = Vec::with_capacity(m.rows());
    for r in 0..m.rows() {
        let n = norm(m.row(r));
        norms.push(n);
        if n > 0.0 {
            for v in out.row_mut(r) {
                *v /= n;
            }
        }
    }
    (out, norms)
}

/// Pairwise cosine similarities between the rows of `a` and the rows of `b`.
pub fn cosine_matrix(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    let (an, _) = normalize_rows(a);
    let (bn, _) = normalize_rows(b);
    let mut c = an.matmul_t(&bn)?;
    for v in c.as_mut_slice() {
        *v = v.clamp(-1.0, 1.0);
    }
    Ok(c)
}

/// Result of [`cosine_cross_entropy`].
#[derive(Clone, Debug)]
pub struct CrossEntropy {
    /// Mean over queries of `-log softmax_l(scale · cos(q, k_l))[target]`.
    pub loss: f64,
    pub grad_queries: Matrix,
    pub grad_keys: Matrix,
}

/// Softmax cross-entropy over scaled cosine logits between each query row
/// and every key row. Gradients are exact for both sides; a pair involving a
/// zero-norm row contributes a constant logit of 0 and no gradient.
pub fn cosine_cross_entropy(
    queries: &Matrix,
    keys: &Matrix,
    targets: &[usize],
    scale: f64,
) -> Result<CrossEntropy> {
    if queries.cols() != keys.cols() {
        return Err(Error::Shape(format!(
            "queries have width {}, keys {}",
            queries.cols(),
            keys.cols()
        )));
    }
    if targets.len() != queries.rows() {
        return Err(Error::Shape(format!(
            "{} targets for {} queries",
            targets.len(),
            queries.rows()
        )));
    }
    if let Some(&t) = targets.iter().find(|&&t| t >= keys.rows()) {
        return Err(Error::Validation(format!(
            "target {t} out of range for {} keys",
            keys.rows()
        )));
    }
    let batch = queries.rows();
    let (qn, q_norms) = normalize_rows(queries);
    let (kn, k_norms) = normalize_rows(keys);
    let cos = qn.matmul_t(&kn)?;

    // dL/dcos, already divided by the batch size
    let mut g = Matrix::zeros(batch, keys.rows());
    let mut loss = 0.0;
    for s in 0..batch {
        let logits: Vec<f64> = cos.row(s).iter().map(|c| scale * c).collect();
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = logits.iter().map(|z| (z - max).exp()).sum();
        let lse = max + sum.ln();
        loss += lse - logits[targets[s]];
        let grow = g.row_mut(s);
        for (l, z) in logits.iter().enumerate() {
            let p = (z - lse).exp();
            let indicator = if l == targets[s] { 1.0 } else { 0.0 };
            grow[l] = scale * (p - indicator) / batch as f64;
        }
    }
    let loss = if batch == 0 { 0.0 } else { loss / batch as f64 };

    let mut grad_queries = Matrix::zeros(batch, queries.cols());
    for s in 0..batch {
        if q_norms[s] == 0.0 {
            continue;
        }
        let mut radial = 0.0;
        let out = grad_queries.row_mut(s);
        for l in 0..keys.rows() {
            if k_norms[l] == 0.0 {
                continue;
            }
            let gs = g[(s, l)];
            radial += gs * cos[(s, l)];
            for (o, k) in out.iter_mut().zip(kn.row(l)) {
                *o += gs * k;
            }
        }
        for (o, q) in out.iter_mut().zip(qn.row(s)) {
            *o = (*o - radial * q) / q_norms[s];
        }
    }

    let mut grad_keys = Matrix::zeros(keys.rows(), keys.cols());
    for l in 0..keys.rows() {
        if k_norms[l] == 0.0 {
            continue;
        }
        let mut radial = 0.0;
        let out = grad_keys.row_mut(l);
        for s in 0..batch {
            if q_norms[s] == 0.0 {
                continue;
            }
            let gs = g[(s, l)];
            radial += gs * cos[(s, l)];
            for (o, q) in out.iter_mut().zip(qn.row(s)) {
                *o += gs * q;
            }
        }
        for (o, k) in out.iter_mut().zip(kn.row(l)) {
            *o = (*o - radial * k) / k_norms[l];
        }
    }

    Ok(CrossEntropy {
        loss,
        grad_queries,
        grad_keys,
    })
}
