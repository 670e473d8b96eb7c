//! Flat space: the reference implementation every other space degenerates to.

pub fn dist(x: &[f64], y: &[f64]) -> f64 {
    x.iter()
        .zip(y)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}

pub fn exp(x: &[f64], v: &[f64]) -> Vec<f64> {
    x.iter().zip(v).map(|(a, b)| a + b).collect()
}

pub fn log(x: &[f64], y: &[f64]) -> Vec<f64> {
    y.iter().zip(x).map(|(a, b)| a - b).collect()
}
