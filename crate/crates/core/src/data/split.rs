use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::Split;
use crate::error::{Error, Result};
use crate::rng::{stream, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitFractions {
    pub train: f64,
    pub validation: f64,
    pub test: f64,
}

impl Default for SplitFractions {
    fn default() -> Self {
        Self {
            train: 0.8,
            validation: 0.1,
            test: 0.1,
        }
    }
}

impl SplitFractions {
    pub fn new(train: f64, validation: f64, test: f64) -> Result<Self> {
        let f = Self {
            train,
            validation,
            test,
        };
        f.validate()?;
        Ok(f)
    }

    pub fn validate(&self) -> Result<()> {
        let parts = [self.train, self.validation, self.test];
        if parts.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::config("split", "fractions must be nonnegative"));
        }
        if (parts.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::config("split", "fractions must sum to 1"));
        }
        if self.train <= 0.0 {
            return Err(Error::config("split.train", "must be positive"));
        }
        Ok(())
    }

    fn as_array(&self) -> [f64; 3] {
        [self.train, self.validation, self.test]
    }
}

/// Hamilton apportionment of `n` items to `quotas` (which sum to 1); ties go
/// to the earlier split.
fn apportion(n: usize, quotas: [f64; 3]) -> [usize; 3] {
    let exact: Vec<f64> = quotas.iter().map(|q| q * n as f64).collect();
    let mut counts = [0usize; 3];
    for (c, e) in counts.iter_mut().zip(&exact) {
        *c = e.floor() as usize;
    }
    let mut left = n - counts.iter().sum::<usize>();
    let mut order: Vec<usize> = (0..3).collect();
    order.sort_by(|&a, &b| {
        let ra = exact[a] - exact[a].floor();
        let rb = exact[b] - exact[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &k in order.iter().cycle() {
        if left == 0 {
            break;
        }
        if quotas[k] > 0.0 {
            counts[k] += 1;
            left -= 1;
        }
    }
    counts
}

/// Split labels stratified by event status. Split sizes follow `fractions`
/// over all records; events are then apportioned across splits by the same
/// fractions, so each split's event fraction tracks the global one.
pub fn stratified_split(
    events: &[bool],
    fractions: SplitFractions,
    seed: u64,
) -> Result<Vec<Split>> {
    fractions.validate()?;
    let n = events.len();
    let q = fractions.as_array();
    let totals = apportion(n, q);
    let mut ev: Vec<usize> = (0..n).filter(|&i| events[i]).collect();
    let mut cens: Vec<usize> = (0..n).filter(|&i| !events[i]).collect();
    let mut ev_counts = apportion(ev.len(), q);
    // a split cannot hold more events than records
    for k in 1..3 {
        if ev_counts[k] > totals[k] {
            ev_counts[0] += ev_counts[k] - totals[k];
            ev_counts[k] = totals[k];
        }
    }
    if ev_counts[0] > totals[0] {
        return Err(Error::config(
            "split",
            "cannot place events consistently with fractions",
        ));
    }
    if ev_counts[0] == 0 {
        return Err(Error::NoEvents("training split".into()));
    }
    for (k, split) in Split::ALL.iter().enumerate().skip(1) {
        if totals[k] > 0 && ev_counts[k] == 0 {
            log::warn!("{} split received no events", split.as_str());
        }
    }

    let mut rng = stream(seed, Stream::Shuffle);
    ev.shuffle(&mut rng);
    cens.shuffle(&mut rng);

    let mut labels = vec![Split::Train; n];
    let (mut ei, mut ci) = (0, 0);
    for (k, split) in Split::ALL.into_iter().enumerate() {
        for &i in &ev[ei..ei + ev_counts[k]] {
            labels[i] = split;
        }
        ei += ev_counts[k];
        let nc = totals[k] - ev_counts[k];
        for &i in &cens[ci..ci + nc] {
            labels[i] = split;
        }
        ci += nc;
    }
    Ok(labels)
}
