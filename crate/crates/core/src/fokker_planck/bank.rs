use std::f64::consts::SQRT_2;

/// Smooth test function with analytic gradient and Hessian.
#[derive(Debug, Clone, PartialEq)]
pub enum TestFunction {
    /// `exp(-|x - center|_2^2 / (2 width^2))`.
    GaussianBump { center: Vec<f64>, width: f64 },
    /// `radius * tanh(x_coord / radius)`.
    SmoothClip { coord: usize, radius: f64 },
    /// `radius^2 * (1 - exp(-x_coord^2 / radius^2))`.
    SmoothSquare { coord: usize, radius: f64 },
    /// `prod_k (tanh((x_k + a)/w) - tanh((x_k - a)/w)) / 2`: close to 1 on
    /// `[-a, a]^d`, flat there up to exponentially small terms.
    Plateau { half_width: f64, softness: f64 },
}

fn sech2(u: f64) -> f64 {
    let c = u.cosh();
    if c.is_finite() {
        1.0 / (c * c)
    } else {
        0.0
    }
}

/// One-dimensional plateau factor and its first two derivatives.
fn plateau_1d(x: f64, a: f64, w: f64) -> (f64, f64, f64) {
    let (up, um) = ((x + a) / w, (x - a) / w);
    let (tp, tm) = (up.tanh(), um.tanh());
    let (sp, sm) = (sech2(up), sech2(um));
    let f = 0.5 * (tp - tm);
    let f1 = 0.5 * (sp - sm) / w;
    let f2 = -(tp * sp - tm * sm) / (w * w);
    (f, f1, f2)
}

impl TestFunction {
    pub fn value(&self, x: &[f64]) -> f64 {
        match self {
            TestFunction::GaussianBump { center, width } => {
                let r2: f64 = x.iter().zip(center).map(|(a, c)| (a - c) * (a - c)).sum();
                (-r2 / (2.0 * width * width)).exp()
            }
            TestFunction::SmoothClip { coord, radius } => radius * (x[*coord] / radius).tanh(),
            TestFunction::SmoothSquare { coord, radius } => {
                let y = x[*coord];
                radius * radius * (1.0 - (-(y * y) / (radius * radius)).exp())
            }
            TestFunction::Plateau {
                half_width,
                softness,
            } => x
                .iter()
                .map(|v| plateau_1d(*v, *half_width, *softness).0)
                .product(),
        }
    }

    /// Writes the value, gradient (`d`) and row-major Hessian (`d x d`).
    pub fn eval(&self, x: &[f64], grad: &mut [f64], hess: &mut [f64]) -> f64 {
        let d = x.len();
        grad.fill(0.0);
        hess.fill(0.0);
        match self {
            TestFunction::GaussianBump { center, width } => {
                let w2 = width * width;
                let phi = self.value(x);
                for i in 0..d {
                    let zi = x[i] - center[i];
                    grad[i] = -zi / w2 * phi;
                    for j in 0..d {
                        let zj = x[j] - center[j];
                        let delta = if i == j { 1.0 } else { 0.0 };
                        hess[i * d + j] = phi * (zi * zj / (w2 * w2) - delta / w2);
                    }
                }
                phi
            }
            TestFunction::SmoothClip { coord, radius } => {
                let th = (x[*coord] / radius).tanh();
                let s = 1.0 - th * th;
                grad[*coord] = s;
                hess[coord * d + coord] = -2.0 / radius * th * s;
                radius * th
            }
            TestFunction::SmoothSquare { coord, radius } => {
                let y = x[*coord];
                let r2 = radius * radius;
                let e = (-(y * y) / r2).exp();
                grad[*coord] = 2.0 * y * e;
                hess[coord * d + coord] = (2.0 - 4.0 * y * y / r2) * e;
                r2 * (1.0 - e)
            }
            TestFunction::Plateau {
                half_width,
                softness,
            } => {
                let parts: Vec<(f64, f64, f64)> = x
                    .iter()
                    .map(|v| plateau_1d(*v, *half_width, *softness))
                    .collect();
                let prod_except = |skip: &[usize]| -> f64 {
                    parts
                        .iter()
                        .enumerate()
                        .filter(|(k, _)| !skip.contains(k))
                        .map(|(_, p)| p.0)
                        .product()
                };
                for i in 0..d {
                    grad[i] = parts[i].1 * prod_except(&[i]);
                    for j in 0..d {
                        hess[i * d + j] = if i == j {
                            parts[i].2 * prod_except(&[i])
                        } else {
                            parts[i].1 * parts[j].1 * prod_except(&[i, j])
                        };
                    }
                }
                parts.iter().map(|p| p.0).product()
            }
        }
    }

    /// Lipschitz constant with respect to the max norm.
    pub fn lipschitz_bound(&self, d: usize) -> f64 {
        match self {
            TestFunction::GaussianBump { width, .. } => (d as f64).sqrt() * (-0.5f64).exp() / width,
            TestFunction::SmoothClip { .. } => 1.0,
            TestFunction::SmoothSquare { radius, .. } => SQRT_2 * radius * (-0.5f64).exp(),
            TestFunction::Plateau { softness, .. } => d as f64 / softness,
        }
    }

    pub fn name(&self) -> String {
        match self {
            TestFunction::GaussianBump { center, width } => format!("bump({center:?},{width})"),
            TestFunction::SmoothClip { coord, radius } => format!("clip(x{coord},{radius})"),
            TestFunction::SmoothSquare { coord, radius } => format!("square(x{coord},{radius})"),
            TestFunction::Plateau {
                half_width,
                softness,
            } => format!("plateau({half_width},{softness})"),
        }
    }
}

/// Five functions sized to a cloud of typical magnitude `scale`: two
/// Gaussian bumps, a smoothed clip, a smoothed square, and a plateau
/// covering `[-8 scale, 8 scale]^d`.
pub fn default_bank(d: usize, scale: f64) -> Vec<TestFunction> {
    vec![
        TestFunction::GaussianBump {
            center: vec![0.0; d],
            width: scale,
        },
        TestFunction::GaussianBump {
            center: vec![0.5 * scale; d],
            width: 0.75 * scale,
        },
        TestFunction::SmoothClip {
            coord: 0,
            radius: 2.0 * scale,
        },
        TestFunction::SmoothSquare {
            coord: 0,
            radius: 2.0 * scale,
        },
        TestFunction::Plateau {
            half_width: 8.0 * scale,
            softness: 0.5 * scale,
        },
    ]
}
