use rand::Rng;

use super::NnError;

/// Logit assigned to illegal entries. Finite on purpose: `exp(-1e9 - max)`
/// underflows to exactly 0 without producing NaN in differences.
pub const MASKED_LOGIT: f32 = -1e9;

fn check_legal(legal: &[bool]) -> Result<(), NnError> {
    if legal.iter().any(|&l| l) {
        Ok(())
    } else {
        Err(NnError::NoLegalAction)
    }
}

pub fn masked_logits(logits: &[f32], legal: &[bool]) -> Result<Vec<f32>, NnError> {
    assert_eq!(logits.len(), legal.len());
    check_legal(legal)?;
    Ok(logits.iter().zip(legal).map(|(&x, &l)| if l { x } else { MASKED_LOGIT }).collect())
}

/// Numerically stable `ln Σ exp(x)`.
pub fn logsumexp(x: &[f32]) -> f32 {
    let m = x.iter().copied().fold(f32::NEG_INFINITY, f32::max);
    if m == f32::NEG_INFINITY {
        return m;
    }
    let s: f64 = x.iter().map(|&v| ((v - m) as f64).exp()).sum();
    (m as f64 + s.ln()) as f32
}

pub fn logsumexp_f64(x: &[f64]) -> f64 {
    let m = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + x.iter().map(|&v| (v - m).exp()).sum::<f64>().ln()
}

pub fn softmax(x: &[f32]) -> Vec<f32> {
    let m = x.iter().copied().fold(f32::NEG_INFINITY, f32::max);
    let e: Vec<f64> = x.iter().map(|&v| ((v - m) as f64).exp()).collect();
    let s: f64 = e.iter().sum();
    e.iter().map(|&v| (v / s) as f32).collect()
}

/// Softmax restricted to legal entries; illegal entries get probability 0.
pub fn masked_softmax(logits: &[f32], legal: &[bool]) -> Result<Vec<f32>, NnError> {
    Ok(softmax(&masked_logits(logits, legal)?))
}

/// `ln Σ_legal exp(x)` and the legal softmax (its gradient).
pub fn masked_logsumexp(x: &[f32], legal: &[bool]) -> Result<(f32, Vec<f32>), NnError> {
    let ml = masked_logits(x, legal)?;
    Ok((logsumexp(&ml), softmax(&ml)))
}

/// Index of the largest legal value; ties go to the lowest index.
pub fn masked_argmax(values: &[f32], legal: &[bool]) -> Result<usize, NnError> {
    check_legal(legal)?;
    let mut best: Option<usize> = None;
    for (i, (&v, &l)) in values.iter().zip(legal).enumerate() {
        if l && best.is_none_or(|b| v > values[b]) {
            best = Some(i);
        }
    }
    Ok(best.expect("checked above"))
}

/// Sample from the legal softmax. Only legal indices can be returned.
pub fn masked_sample(logits: &[f32], legal: &[bool], rng: &mut impl Rng) -> Result<usize, NnError> {
    let p = masked_softmax(logits, legal)?;
    let u: f64 = rng.random();
    let mut acc = 0.0f64;
    let mut last = 0;
    for (i, (&pi, &l)) in p.iter().zip(legal).enumerate() {
        if !l {
            continue;
        }
        last = i;
        acc += pi as f64;
        if u < acc {
            return Ok(i);
        }
    }
    Ok(last)
}

/// Masked cross-entropy `-ln p(target)` and its gradient wrt the logits
/// (`p - onehot`, zero on illegal entries).
pub fn masked_cross_entropy(logits: &[f32], legal: &[bool], target: usize) -> Result<(f32, Vec<f32>), NnError> {
    let ml = masked_logits(logits, legal)?;
    let lse = logsumexp(&ml);
    let mut g = softmax(&ml);
    g[target] -= 1.0;
    Ok((lse - ml[target], g))
}

/// `mean |tau - 1(u < 0)| u²` and its gradient wrt each residual.
pub fn expectile_loss(u: &[f32], tau: f32) -> (f32, Vec<f32>) {
    let n = u.len().max(1) as f64;
    let mut loss = 0.0f64;
    let grad = u
        .iter()
        .map(|&x| {
            let w = if x < 0.0 { 1.0 - tau } else { tau };
            loss += (w * x * x) as f64;
            (2.0 * w * x) / n as f32
        })
        .collect();
    ((loss / n) as f32, grad)
}

/// Relaxed one-hot sample plus the straight-through hard index.
#[derive(Clone, Debug, PartialEq)]
pub struct GumbelSample {
    pub soft: Vec<f32>,
    pub hard: usize,
}

pub fn gumbel_noise(n: usize, rng: &mut impl Rng) -> Vec<f32> {
    (0..n)
        .map(|_| {
            let u: f64 = rng.random_range(f64::MIN_POSITIVE..1.0);
            (-(-u.ln()).ln()) as f32
        })
        .collect()
}

/// `softmax((logits + g) / temperature)` over legal entries with explicit noise `g`.
pub fn gumbel_softmax_with_noise(
    logits: &[f32],
    legal: &[bool],
    noise: &[f32],
    temperature: f32,
) -> Result<GumbelSample, NnError> {
    if !(temperature > 0.0) {
        return Err(NnError::Temperature(temperature));
    }
    let z: Vec<f32> = logits.iter().zip(noise).map(|(&l, &g)| (l + g) / temperature).collect();
    let soft = masked_softmax(&z, legal)?;
    let hard = masked_argmax(&soft, legal)?;
    Ok(GumbelSample { soft, hard })
}

pub fn gumbel_softmax(
    logits: &[f32],
    legal: &[bool],
    temperature: f32,
    rng: &mut impl Rng,
) -> Result<GumbelSample, NnError> {
    let g = gumbel_noise(logits.len(), rng);
    gumbel_softmax_with_noise(logits, legal, &g, temperature)
}

/// Backward of `y = softmax(z / temperature)`: gradient wrt `z` given `dy`.
pub fn softmax_backward(y: &[f32], dy: &[f32], temperature: f32) -> Vec<f32> {
    let dot: f64 = y.iter().zip(dy).map(|(&a, &b)| (a * b) as f64).sum();
    y.iter().zip(dy).map(|(&yi, &gi)| yi * (gi - dot as f32) / temperature).collect()
}
