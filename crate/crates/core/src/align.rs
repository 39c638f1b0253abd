//! Kabsch-style rigid alignment of point clouds, used to compare
//! reconstructed immersions against exact parametrizations modulo a rigid
//! motion of the flat target.

use crate::tensor::{Mat, Vect};

/// Orthogonal map Q and translation t minimizing sum |Q a_i + t - b_i|^2.
/// Reflections are allowed (full orthogonal group).
pub fn rigid_align(src: &[Vect], dst: &[Vect]) -> (Mat, Vect) {
    let n = src.len().min(dst.len());
    let d = src[0].len();
    let mut ca = Vect::zeros(d);
    let mut cb = Vect::zeros(d);
    for i in 0..n {
        ca += &src[i];
        cb += &dst[i];
    }
    ca /= n as f64;
    cb /= n as f64;
    let mut h = Mat::zeros(d, d);
    for i in 0..n {
        h += (&dst[i] - &cb) * (&src[i] - &ca).transpose();
    }
    let svd = h.svd(true, true);
    let q = svd.u.unwrap() * svd.v_t.unwrap();
    let t = cb - &q * ca;
    (q, t)
}

/// Max node error after the best rigid alignment of `src` onto `dst`.
pub fn aligned_max_error(src: &[Vect], dst: &[Vect]) -> f64 {
    let (q, t) = rigid_align(src, dst);
    src.iter()
        .zip(dst.iter())
        .map(|(a, b)| (&q * a + &t - b).norm())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_a_known_rotation() {
        let pts: Vec<Vect> = (0..12)
            .map(|i| {
                let t = i as f64 * 0.37;
                Vect::from_vec(vec![t.cos(), t.sin(), 0.2 * t])
            })
            .collect();
        let th = 0.83f64;
        let q = Mat::from_row_slice(
            3,
            3,
            &[th.cos(), -th.sin(), 0.0, th.sin(), th.cos(), 0.0, 0.0, 0.0, 1.0],
        );
        let t = Vect::from_vec(vec![0.3, -1.2, 2.0]);
        let moved: Vec<Vect> = pts.iter().map(|p| &q * p + &t).collect();
        assert!(aligned_max_error(&pts, &moved) < 1e-12);
    }
}
