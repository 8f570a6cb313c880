/// Online weighted mean of a vector stream: `Σ w_k x^k / Σ w_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct RunningAverage {
    mean: Vec<f64>,
    total_weight: f64,
    count: u64,
}

impl RunningAverage {
    pub fn new(dim: usize) -> Self {
        RunningAverage { mean: vec![0.0; dim], total_weight: 0.0, count: 0 }
    }

    pub fn push(&mut self, x: &[f64], weight: f64) {
        debug_assert_eq!(x.len(), self.mean.len());
        self.count += 1;
        self.total_weight += weight;
        if self.total_weight == 0.0 {
            return;
        }
        let r = weight / self.total_weight;
        for (m, xi) in self.mean.iter_mut().zip(x) {
            *m += r * (xi - *m);
        }
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn total_weight(&self) -> f64 {
        self.total_weight
    }

    pub fn count(&self) -> u64 {
        self.count
    }
}
