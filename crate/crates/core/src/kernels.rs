//! Inner loops shared by the coupling passes: dot, axpy and a normal sampler.
//!
//! The vector kernels keep a fixed four-lane summation order, so the AVX2 and
//! portable paths return bitwise identical results.

use rand::RngCore;
use std::sync::LazyLock;

#[inline(always)]
fn dot_portable(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [0.0f64; 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for (x, y) in ra.iter().zip(rb) {
        s += x * y;
    }
    s
}

#[inline(always)]
fn axpy_portable(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2")]
unsafe fn dot_avx2(a: &[f64], b: &[f64]) -> f64 {
    dot_portable(a, b)
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2")]
unsafe fn axpy_avx2(alpha: f64, x: &[f64], y: &mut [f64]) {
    axpy_portable(alpha, x, y)
}

#[cfg(target_arch = "x86_64")]
static HAS_AVX2: LazyLock<bool> = LazyLock::new(|| std::arch::is_x86_feature_detected!("avx2"));

/// `sum_i a_i b_i` over the common length.
#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    #[cfg(target_arch = "x86_64")]
    {
        if *HAS_AVX2 {
            // SAFETY: the CPU supports AVX2, checked at runtime.
            return unsafe { dot_avx2(a, b) };
        }
    }
    dot_portable(a, b)
}

/// `y += alpha x` over the common length.
#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    #[cfg(target_arch = "x86_64")]
    {
        if *HAS_AVX2 {
            // SAFETY: the CPU supports AVX2, checked at runtime.
            return unsafe { axpy_avx2(alpha, x, y) };
        }
    }
    axpy_portable(alpha, x, y)
}

const LAYERS: usize = 128;
const ZIG_R: f64 = 3.442_619_855_899;
const ZIG_V: f64 = 9.912_563_035_262_17e-3;

struct Ziggurat {
    x: [f64; LAYERS + 1],
    f: [f64; LAYERS + 1],
}

static ZIGGURAT: LazyLock<Ziggurat> = LazyLock::new(|| {
    let pdf = |x: f64| (-0.5 * x * x).exp();
    let mut x = [0.0; LAYERS + 1];
    let mut f = [0.0; LAYERS + 1];
    x[0] = ZIG_V / pdf(ZIG_R);
    x[1] = ZIG_R;
    for i in 1..LAYERS - 1 {
        x[i + 1] = (-2.0 * (ZIG_V / x[i] + pdf(x[i])).ln()).sqrt();
    }
    x[LAYERS] = 0.0;
    for i in 0..=LAYERS {
        f[i] = pdf(x[i]);
    }
    Ziggurat { x, f }
});

#[inline(always)]
fn unit_open(bits: u64) -> f64 {
    ((bits >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

#[cold]
fn slow_normal<R: RngCore>(rng: &mut R, z: &Ziggurat, layer: usize, x: f64) -> Option<f64> {
    if layer == 0 {
        loop {
            let t = -unit_open(rng.next_u64()).ln() / ZIG_R;
            let y = -unit_open(rng.next_u64()).ln();
            if 2.0 * y > t * t {
                return Some(if x < 0.0 { -(ZIG_R + t) } else { ZIG_R + t });
            }
        }
    }
    let u = unit_open(rng.next_u64());
    if z.f[layer + 1] + u * (z.f[layer] - z.f[layer + 1]) < (-0.5 * x * x).exp() {
        Some(x)
    } else {
        None
    }
}

/// Candidate abscissa from 32 random bits: 7 pick the layer, 25 the signed
/// abscissa. Returns the value, its layer and whether the fast test accepts it.
#[inline(always)]
fn candidate(z: &Ziggurat, bits: u32) -> (f64, usize, bool) {
    let layer = (bits & 0x7f) as usize;
    let u = (((bits as i32) >> 7) as f64 + 0.5) * (1.0 / (1u64 << 24) as f64);
    let x = u * z.x[layer];
    (x, layer, x.abs() < z.x[layer + 1])
}

/// Completes a rejected fast draw, then keeps drawing until something is accepted.
#[cold]
fn resolve<R: RngCore>(rng: &mut R, z: &Ziggurat, mut x: f64, mut layer: usize) -> f64 {
    loop {
        if let Some(v) = slow_normal(rng, z, layer, x) {
            return v;
        }
        let (y, l, ok) = candidate(z, rng.next_u64() as u32);
        if ok {
            return y;
        }
        x = y;
        layer = l;
    }
}

const CHUNK: usize = 256;

/// Fills `out` with standard normal draws (128-layer ziggurat).
///
/// Each chunk is filled branch-free with two candidates per `u64`; the few
/// candidates that miss the fast test are then resolved in order.
pub fn fill_normals<R: RngCore>(rng: &mut R, out: &mut [f64]) {
    let z = &*ZIGGURAT;
    let mut missed = [0u16; CHUNK];
    let mut layers = [0u8; CHUNK];
    for chunk in out.chunks_mut(CHUNK) {
        let mut cnt = 0usize;
        let mut pairs = chunk.chunks_exact_mut(2);
        let mut base = 0usize;
        for pair in &mut pairs {
            let w = rng.next_u64();
            let (a, la, oka) = candidate(z, w as u32);
            let (b, lb, okb) = candidate(z, (w >> 32) as u32);
            pair[0] = a;
            pair[1] = b;
            missed[cnt] = base as u16;
            layers[cnt] = la as u8;
            cnt += !oka as usize;
            missed[cnt] = (base + 1) as u16;
            layers[cnt] = lb as u8;
            cnt += !okb as usize;
            base += 2;
        }
        if let [last] = pairs.into_remainder() {
            let (a, la, oka) = candidate(z, rng.next_u64() as u32);
            *last = a;
            missed[cnt] = base as u16;
            layers[cnt] = la as u8;
            cnt += !oka as usize;
        }
        for j in 0..cnt {
            let i = missed[j] as usize;
            chunk[i] = resolve(rng, z, chunk[i], layers[j] as usize);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_xoshiro::Xoshiro256PlusPlus;

    #[test]
    fn kernels_match_naive() {
        let a: Vec<f64> = (0..37).map(|i| (i as f64 * 0.3).sin()).collect();
        let b: Vec<f64> = (0..37).map(|i| (i as f64 * 0.7).cos()).collect();
        let naive: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
        assert!((dot(&a, &b) - naive).abs() < 1e-12);
        assert_eq!(dot(&a, &b), dot_portable(&a, &b));
        let mut y = b.clone();
        axpy(2.0, &a, &mut y);
        for i in 0..37 {
            assert_eq!(y[i], b[i] + 2.0 * a[i]);
        }
    }

    #[test]
    fn table_is_consistent() {
        let z = &*ZIGGURAT;
        // layer 127 must close at the mode with area V
        let top = z.x[LAYERS - 1] * (1.0 - z.f[LAYERS - 1]);
        assert!((top - ZIG_V).abs() < 1e-6, "top layer area {top}");
        assert!(z.x.windows(2).skip(1).all(|w| w[0] > w[1]));
    }

    #[test]
    fn normal_moments_and_cdf() {
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(42);
        let n = 2_000_000;
        let mut v = vec![0.0; n];
        fill_normals(&mut rng, &mut v);
        let mean = v.iter().sum::<f64>() / n as f64;
        let m2 = v.iter().map(|x| x * x).sum::<f64>() / n as f64;
        let m4 = v.iter().map(|x| x.powi(4)).sum::<f64>() / n as f64;
        let se = (1.0 / n as f64).sqrt();
        assert!(mean.abs() < 5.0 * se);
        assert!((m2 - 1.0).abs() < 5.0 * (2.0f64 / n as f64).sqrt());
        assert!((m4 - 3.0).abs() < 5.0 * (96.0f64 / n as f64).sqrt());
        // Phi at a few points, using erfc from the tail expansion is overkill; compare to known values
        let checks = [
            (-2.0, 0.022_750_131_948_179_2),
            (-1.0, 0.158_655_253_931_457),
            (0.5, 0.691_462_461_274_013),
            (3.0, 0.998_650_101_968_37),
        ];
        for (x, phi) in checks {
            let emp = v.iter().filter(|&&s| s <= x).count() as f64 / n as f64;
            let se = (phi * (1.0 - phi) / n as f64).sqrt();
            assert!((emp - phi).abs() < 5.0 * se, "cdf at {x}: {emp} vs {phi}");
        }
        let tail = v.iter().filter(|&&s| s > 3.5).count() as f64 / n as f64;
        let expect = 2.326_290_790_355_25e-4;
        assert!((tail - expect).abs() < 5.0 * (expect / n as f64).sqrt());
    }
}
