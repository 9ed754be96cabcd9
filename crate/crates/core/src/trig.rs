//! Branch-free sine and cosine for the feature-map hot loop.
//!
//! Arguments are reduced by multiples of π/2 with a three-part Cody-Waite
//! split and evaluated with the fdlibm minimax kernels on `[−π/4, π/4]`.
//! Results agree with `f64::sin`/`f64::cos` to a few ulp for `|x| ≤ 2²⁰`;
//! larger arguments fall back to the standard library.

const FRAC_2_PI: f64 = std::f64::consts::FRAC_2_PI;
const PIO2_1: f64 = 1.570_796_326_734_125_614_17e0;
const PIO2_2: f64 = 6.077_100_506_303_965_976_60e-11;
const PIO2_3: f64 = 2.022_266_248_711_166_455_80e-21;
const ROUND: f64 = 6_755_399_441_055_744.0; // 1.5 · 2⁵²
const LIMIT: f64 = 1_048_576.0;

const S1: f64 = -1.666_666_666_666_663_243_48e-1;
const S2: f64 = 8.333_333_333_322_489_461_24e-3;
const S3: f64 = -1.984_126_982_985_794_931_34e-4;
const S4: f64 = 2.755_731_370_707_006_767_89e-6;
const S5: f64 = -2.505_076_025_340_686_341_95e-8;
const S6: f64 = 1.589_690_995_211_550_102_21e-10;

const C1: f64 = 4.166_666_666_666_660_190_37e-2;
const C2: f64 = -1.388_888_888_887_410_957_49e-3;
const C3: f64 = 2.480_158_728_947_672_941_78e-5;
const C4: f64 = -2.755_731_435_139_066_330_35e-7;
const C5: f64 = 2.087_572_321_298_174_827_90e-9;
const C6: f64 = -1.135_964_755_778_819_482_65e-11;

#[inline(always)]
fn kernels(r: f64) -> (f64, f64) {
    let z = r * r;
    let s = r + z * r * (S1 + z * (S2 + z * (S3 + z * (S4 + z * (S5 + z * S6)))));
    let cr = z * (C1 + z * (C2 + z * (C3 + z * (C4 + z * (C5 + z * C6)))));
    let hz = 0.5 * z;
    let w = 1.0 - hz;
    let c = w + (((1.0 - w) - hz) + z * cr);
    (s, c)
}

/// `(sin x, cos x)` for `|x| ≤ 2²⁰`, without branches.
#[inline(always)]
fn reduced(x: f64) -> (f64, f64) {
    let t = x * FRAC_2_PI + ROUND;
    let bits = t.to_bits();
    let q = t - ROUND;
    let r = ((x - q * PIO2_1) - q * PIO2_2) - q * PIO2_3;
    let (s, c) = kernels(r);
    // quadrant q: odd quadrants swap sin and cos; bit 1 of q (resp. q + 1)
    // flips the sign of sin (resp. cos)
    let swap = 0u64.wrapping_sub(bits & 1);
    let (sb, cb) = (s.to_bits(), c.to_bits());
    let sin = ((sb & !swap) | (cb & swap)) ^ ((bits & 2) << 62);
    let cos = ((cb & !swap) | (sb & swap)) ^ ((bits.wrapping_add(1) & 2) << 62);
    (f64::from_bits(sin), f64::from_bits(cos))
}

fn in_range(values: &[f64]) -> bool {
    values.iter().fold(0.0f64, |m, v| m.max(v.abs())) <= LIMIT
        && values.iter().all(|v| v.is_finite())
}

/// `(sin x, cos x)`.
#[cfg(test)]
pub fn sin_cos(x: f64) -> (f64, f64) {
    if x.abs() <= LIMIT {
        reduced(x)
    } else {
        x.sin_cos()
    }
}

/// Replaces every entry by its cosine.
pub fn cos_in_place(values: &mut [f64]) {
    if in_range(values) {
        for v in values.iter_mut() {
            *v = reduced(*v).1;
        }
    } else {
        for v in values.iter_mut() {
            *v = v.cos();
        }
    }
}

/// Replaces every entry by its cosine and writes its sine to `sines`.
pub fn sin_cos_in_place(values: &mut [f64], sines: &mut [f64]) {
    assert_eq!(values.len(), sines.len());
    if in_range(values) {
        for (v, s) in values.iter_mut().zip(sines.iter_mut()) {
            let (sv, cv) = reduced(*v);
            *s = sv;
            *v = cv;
        }
    } else {
        for (v, s) in values.iter_mut().zip(sines.iter_mut()) {
            let (sv, cv) = v.sin_cos();
            *s = sv;
            *v = cv;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: f64, b: f64, x: f64) -> bool {
        (a - b).abs() <= 4.0 * f64::EPSILON * (1.0 + x.abs() * 1e-3)
    }

    #[test]
    fn matches_std_on_a_dense_sweep() {
        for i in -200_000..=200_000 {
            let x = i as f64 * 1e-3;
            let (s, c) = sin_cos(x);
            assert!(close(s, x.sin(), x), "sin {x}: {s} vs {}", x.sin());
            assert!(s.is_sign_negative() == x.sin().is_sign_negative() || s == 0.0);
            assert!(close(c, x.cos(), x), "cos {x}: {c} vs {}", x.cos());
        }
    }

    #[test]
    fn special_values() {
        assert_eq!(sin_cos(0.0), (0.0, 1.0));
        assert!(sin_cos(f64::NAN).0.is_nan());
        assert!(sin_cos(f64::INFINITY).1.is_nan());
        assert!(close(sin_cos(1e7).1, 1e7f64.cos(), 0.0));
    }

    #[test]
    fn slices_match_scalars_and_fall_back() {
        let xs: Vec<f64> = (0..1000).map(|i| (i as f64 - 500.0) * 0.37).collect();
        let mut c = xs.clone();
        let mut s = vec![0.0; xs.len()];
        sin_cos_in_place(&mut c, &mut s);
        let mut c2 = xs.clone();
        cos_in_place(&mut c2);
        for (i, x) in xs.iter().enumerate() {
            assert_eq!((s[i], c[i]), sin_cos(*x));
            assert_eq!(c2[i], c[i]);
        }
        let mut big = vec![1e9, 0.5, f64::NAN];
        cos_in_place(&mut big);
        assert_eq!(big[0], 1e9f64.cos());
        assert_eq!(big[1], 0.5f64.cos());
        assert!(big[2].is_nan());
    }

    proptest! {
        #[test]
        fn agrees_with_std(x in -1e4f64..1e4) {
            let (s, c) = sin_cos(x);
            prop_assert!(close(s, x.sin(), x));
            prop_assert!(close(c, x.cos(), x));
        }
    }
}
