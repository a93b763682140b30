//! Dynamic time warping between point sequences.

use crate::geometry::WorldPoint;

/// Waypoint spacing applied to trajectories before DTW, meters.
pub const DTW_SPACING: f64 = 0.25;

/// Classical DTW with Euclidean point cost and match / insert / delete steps,
/// aligned at both ends. Returns 0 when either sequence is empty.
pub fn dtw(p: &[WorldPoint], r: &[WorldPoint]) -> f64 {
    if p.is_empty() || r.is_empty() {
        return 0.0;
    }
    let m = r.len();
    let mut prev = vec![f64::INFINITY; m];
    let mut cur = vec![f64::INFINITY; m];
    for (i, pi) in p.iter().enumerate() {
        for (j, rj) in r.iter().enumerate() {
            let cost = pi.distance(rj);
            let best = if i == 0 && j == 0 {
                0.0
            } else {
                let mut b = f64::INFINITY;
                if i > 0 {
                    b = b.min(prev[j]);
                }
                if j > 0 {
                    b = b.min(cur[j - 1]);
                }
                if i > 0 && j > 0 {
                    b = b.min(prev[j - 1]);
                }
                b
            };
            cur[j] = cost + best;
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[m - 1]
}

/// `exp(-dtw(P, R) / (|R| * thresh))`.
pub fn ndtw(p: &[WorldPoint], r: &[WorldPoint], success_thresh: f64) -> f64 {
    if r.is_empty() {
        return 1.0;
    }
    (-dtw(p, r) / (r.len() as f64 * success_thresh)).exp()
}

/// Keep the first point, every point at least `spacing` from the last kept
/// one, and the final point.
pub fn downsample(points: &[WorldPoint], spacing: f64) -> Vec<WorldPoint> {
    let mut out: Vec<WorldPoint> = Vec::new();
    for p in points {
        match out.last() {
            None => out.push(*p),
            Some(last) if last.distance(p) >= spacing => out.push(*p),
            _ => {}
        }
    }
    if let (Some(last), Some(end)) = (out.last(), points.last()) {
        if last != end {
            out.push(*end);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pts(v: &[(f64, f64)]) -> Vec<WorldPoint> {
        v.iter().map(|&(x, y)| WorldPoint::new(x, y)).collect()
    }

    #[test]
    fn single_alignment_case() {
        let p = pts(&[(0.0, 0.0)]);
        let r = pts(&[(0.0, 0.0), (3.0, 4.0)]);
        assert_eq!(dtw(&p, &r), 5.0);
        assert_eq!(dtw(&r, &p), 5.0);
    }

    #[test]
    fn identical_sequences() {
        let r = pts(&[(0.0, 0.0), (1.0, 0.0), (1.0, 2.0)]);
        assert_eq!(dtw(&r, &r), 0.0);
        assert_eq!(ndtw(&r, &r, 3.0), 1.0);
    }

    #[test]
    fn constant_offset_closed_form() {
        let r: Vec<WorldPoint> = (0..10).map(|i| WorldPoint::new(i as f64, 0.0)).collect();
        let p: Vec<WorldPoint> = r.iter().map(|q| q.offset(0.0, 1.0)).collect();
        assert!((dtw(&p, &r) - 10.0).abs() < 1e-12);
        assert!((ndtw(&p, &r, 3.0) - (-10.0f64 / 30.0).exp()).abs() < 1e-12);
    }

    #[test]
    fn downsample_keeps_ends() {
        let p: Vec<WorldPoint> = (0..=10).map(|i| WorldPoint::new(i as f64 * 0.1, 0.0)).collect();
        let d = downsample(&p, 0.25);
        assert_eq!(d.first(), p.first());
        assert_eq!(d.last(), p.last());
        assert!(d.windows(2).take(d.len() - 2).all(|w| w[0].distance(&w[1]) >= 0.25));
    }
}
