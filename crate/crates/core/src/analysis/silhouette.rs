use super::{AnalysisError, Result};

/// Mean silhouette over all points with Euclidean distance. A point alone
/// in its cluster scores 0, as does a point with `a = b = 0`.
pub fn silhouette_score<L: PartialEq>(points: &[Vec<f64>], labels: &[L]) -> Result<f64> {
    if points.len() != labels.len() {
        return Err(AnalysisError::Invalid(format!("{} points but {} labels", points.len(), labels.len())));
    }
    let mut ids: Vec<usize> = Vec::with_capacity(labels.len());
    let mut distinct: Vec<&L> = vec![];
    for l in labels {
        let id = match distinct.iter().position(|d| *d == l) {
            Some(i) => i,
            None => {
                distinct.push(l);
                distinct.len() - 1
            }
        };
        ids.push(id);
    }
    let k = distinct.len();
    if k < 2 {
        return Err(AnalysisError::Invalid("silhouette needs at least two labels".into()));
    }
    if let Some(w) = points.first().map(Vec::len) {
        if points.iter().any(|p| p.len() != w) {
            return Err(AnalysisError::Invalid("hidden vectors differ in width".into()));
        }
    }
    let mut sizes = vec![0usize; k];
    for &c in &ids {
        sizes[c] += 1;
    }
    let n = points.len();
    let mut total = 0.0;
    let mut sums = vec![0.0; k];
    for i in 0..n {
        sums.iter_mut().for_each(|s| *s = 0.0);
        for j in 0..n {
            if i != j {
                let d: f64 = points[i].iter().zip(&points[j]).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
                sums[ids[j]] += d;
            }
        }
        let own = ids[i];
        if sizes[own] < 2 {
            continue;
        }
        let a = sums[own] / (sizes[own] - 1) as f64;
        let b = (0..k)
            .filter(|&c| c != own)
            .map(|c| sums[c] / sizes[c] as f64)
            .fold(f64::INFINITY, f64::min);
        let m = a.max(b);
        if m > 0.0 {
            total += (b - a) / m;
        }
    }
    Ok(total / n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn far_tight_clusters_score_near_one() {
        let mut pts = vec![];
        let mut labels = vec![];
        for i in 0..10 {
            let jitter = 0.1 * (i as f64 / 10.0);
            pts.push(vec![jitter, 0.0]);
            labels.push(0);
            pts.push(vec![100.0 + jitter, 0.0]);
            labels.push(1);
        }
        // a ≈ 0.05, b ≈ 100 for every point.
        let s = silhouette_score(&pts, &labels).unwrap();
        assert!(s > 0.9 && s <= 1.0, "{}", s);
    }

    #[test]
    fn identical_points_across_labels_score_zero() {
        let pts = vec![vec![1.0, 1.0]; 6];
        let labels = [0, 1, 0, 1, 0, 1];
        assert_eq!(silhouette_score(&pts, &labels).unwrap(), 0.0);
    }

    #[test]
    fn single_label_is_an_error() {
        assert!(silhouette_score(&[vec![0.0], vec![1.0]], &[7, 7]).is_err());
    }

    #[test]
    fn hand_computed_three_points() {
        // Points 0 and 1 share a label, 3 is alone (contributes 0).
        let pts = vec![vec![0.0], vec![1.0], vec![3.0]];
        let s = silhouette_score(&pts, &['a', 'a', 'b']).unwrap();
        let s0 = (3.0 - 1.0) / 3.0;
        let s1 = (2.0 - 1.0) / 2.0;
        assert!((s - (s0 + s1) / 3.0).abs() < 1e-12);
    }
}
