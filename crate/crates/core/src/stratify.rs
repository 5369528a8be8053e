use crate::data::Dataset;
use crate::error::AbaeError;

/// A proxy-ordered partition of a dataset into `k` groups of record ids.
#[derive(Debug, Clone)]
pub struct Strata {
    groups: Vec<Vec<u64>>,
}

impl Strata {
    pub fn k(&self) -> usize {
        self.groups.len()
    }

    pub fn groups(&self) -> &[Vec<u64>] {
        &self.groups
    }

    pub fn group(&self, k: usize) -> &[u64] {
        &self.groups[k]
    }
}

/// Sorts records by proxy score and cuts the order into `k` contiguous
/// strata whose sizes differ by at most one (earlier strata take the
/// remainder). Ties on the proxy break by record id, so the partition is a
/// pure function of the dataset.
pub fn stratify(dataset: &Dataset, k: usize) -> Result<Strata, AbaeError> {
    if k == 0 || k > dataset.len() {
        return Err(AbaeError::InvalidK {
            k,
            len: dataset.len(),
        });
    }

    let mut order: Vec<(f64, u64)> = dataset
        .records()
        .iter()
        .map(|r| (r.proxy(), r.id()))
        .collect();
    order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

    let n = order.len();
    let base = n / k;
    let extra = n % k;
    let mut groups = Vec::with_capacity(k);
    let mut at = 0;
    for g in 0..k {
        let take = base + usize::from(g < extra);
        groups.push(order[at..at + take].iter().map(|&(_, id)| id).collect());
        at += take;
    }
    Ok(Strata { groups })
}
