/// A scalar kernel `k(x, y)` on points of a fixed dimension.
pub trait Kernel {
    fn eval(&self, x: &[f64], y: &[f64]) -> f64;

    fn is_symmetric(&self) -> bool {
        true
    }

    /// Descriptor stored alongside a matrix, for kernels that have one.
    fn spec(&self) -> Option<KernelSpec> {
        None
    }
}

/// Closure kernel, mostly for tests and experiments.
pub struct FnKernel<F> {
    f: F,
    symmetric: bool,
}

impl<F: Fn(&[f64], &[f64]) -> f64> FnKernel<F> {
    pub fn new(f: F) -> Self {
        FnKernel { f, symmetric: true }
    }

    pub fn nonsymmetric(f: F) -> Self {
        FnKernel { f, symmetric: false }
    }
}

impl<F: Fn(&[f64], &[f64]) -> f64> Kernel for FnKernel<F> {
    fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        (self.f)(x, y)
    }

    fn is_symmetric(&self) -> bool {
        self.symmetric
    }
}

/// Diffusivity field used by the fractional kernel.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum KappaField {
    /// `kappa = 1`.
    Constant,
    /// `kappa(x) = 1 + f(x1; 0, 1.5) f(x2; 0, 2.0)` with the smooth bump `f`.
    Bump,
}

impl KappaField {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            KappaField::Constant => 1.0,
            KappaField::Bump => 1.0 + bump(x[0], 0.0, 1.5) * bump(x.get(1).copied().unwrap_or(0.0), 0.0, 2.0),
        }
    }

    pub fn id(&self) -> u32 {
        match self {
            KappaField::Constant => 0,
            KappaField::Bump => 1,
        }
    }

    pub fn from_id(id: u32) -> Option<Self> {
        match id {
            0 => Some(KappaField::Constant),
            1 => Some(KappaField::Bump),
            _ => None,
        }
    }
}

/// `exp(-1 / (1 - r^2))` for `|r| < 1` with `r = (x - c) / (width / 2)`,
/// zero elsewhere.
pub fn bump(x: f64, c: f64, width: f64) -> f64 {
    let r = (x - c) / (0.5 * width);
    if r.abs() < 1.0 {
        (-1.0 / (1.0 - r * r)).exp()
    } else {
        0.0
    }
}

/// Kernels that can be named in files and on the command line.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum KernelSpec {
    /// `exp(-|x - y| / length)`.
    Exp { length: f64 },
    /// `sign * 2 sqrt(kappa(x) kappa(y)) / |x - y|^(2 + 2 beta)`, zero for
    /// `x = y`.
    Frac { beta: f64, sign: f64, field: KappaField },
    /// Identically zero.
    Zero,
}

impl KernelSpec {
    fn frac(&self, x: &[f64], y: &[f64], beta: f64, sign: f64, field: KappaField) -> f64 {
        let r2 = dist2(x, y);
        if r2 == 0.0 {
            return 0.0;
        }
        let a = (field.eval(x) * field.eval(y)).sqrt();
        sign * 2.0 * a / radial_power(r2, 1.0 + beta)
    }
}

impl Kernel for KernelSpec {
    fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        match *self {
            KernelSpec::Exp { length } => (-dist2(x, y).sqrt() / length).exp(),
            KernelSpec::Frac { beta, sign, field } => self.frac(x, y, beta, sign, field),
            KernelSpec::Zero => 0.0,
        }
    }

    fn spec(&self) -> Option<KernelSpec> {
        Some(*self)
    }
}

fn dist2(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}

/// `r2^e` with cheap paths for quarter-integer exponents.
fn radial_power(r2: f64, e: f64) -> f64 {
    let q = 4.0 * e;
    if q.fract() == 0.0 && (0.0..=16.0).contains(&q) {
        let q = q as i32;
        let s = r2.sqrt();
        let parts = [1.0, s.sqrt(), s, s * s.sqrt()];
        r2.powi(q / 4) * parts[(q % 4) as usize]
    } else {
        r2.powf(e)
    }
}
