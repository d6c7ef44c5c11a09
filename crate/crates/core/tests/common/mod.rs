//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

/// Double-double number: `hi + lo` with `|lo| <= ulp(hi) / 2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dd {
    pub hi: f64,
    pub lo: f64,
}

fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

impl Dd {
    pub const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };

    pub fn from(x: f64) -> Dd {
        Dd { hi: x, lo: 0.0 }
    }

    fn renorm(hi: f64, lo: f64) -> Dd {
        let (s, e) = two_sum(hi, lo);
        Dd { hi: s, lo: e }
    }

    pub fn add(self, o: Dd) -> Dd {
        let (s, e) = two_sum(self.hi, o.hi);
        let (t, f) = two_sum(self.lo, o.lo);
        let e = e + t;
        let (s, e) = {
            let r = Dd::renorm(s, e);
            (r.hi, r.lo)
        };
        Dd::renorm(s, e + f)
    }

    pub fn neg(self) -> Dd {
        Dd { hi: -self.hi, lo: -self.lo }
    }

    pub fn sub(self, o: Dd) -> Dd {
        self.add(o.neg())
    }

    pub fn mul(self, o: Dd) -> Dd {
        let (p, e) = two_prod(self.hi, o.hi);
        let e = e + (self.hi * o.lo + self.lo * o.hi);
        Dd::renorm(p, e)
    }

    pub fn div(self, o: Dd) -> Dd {
        // two Newton-style correction steps on the quotient
        let q1 = self.hi / o.hi;
        let r = self.sub(o.mul(Dd::from(q1)));
        let q2 = r.hi / o.hi;
        let r = r.sub(o.mul(Dd::from(q2)));
        let q3 = r.hi / o.hi;
        Dd::renorm(q1, q2).add(Dd::from(q3))
    }

    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }
}

/// Weighted least-squares line through `(x, y)` with weights `w`, from the
/// raw (uncentered) normal equations evaluated in double-double.
pub fn wls_oracle(xs: &[f64], ys: &[f64], ws: &[f64]) -> (f64, f64) {
    let (mut sw, mut sx, mut sy, mut sxx, mut sxy) = (Dd::ZERO, Dd::ZERO, Dd::ZERO, Dd::ZERO, Dd::ZERO);
    for ((&x, &y), &w) in xs.iter().zip(ys).zip(ws) {
        let (x, y, w) = (Dd::from(x), Dd::from(y), Dd::from(w));
        sw = sw.add(w);
        sx = sx.add(w.mul(x));
        sy = sy.add(w.mul(y));
        sxx = sxx.add(w.mul(x).mul(x));
        sxy = sxy.add(w.mul(x).mul(y));
    }
    let den = sw.mul(sxx).sub(sx.mul(sx));
    let a = sw.mul(sxy).sub(sx.mul(sy)).div(den);
    let b = sy.sub(a.mul(sx)).div(sw);
    (a.to_f64(), b.to_f64())
}

/// Kendall tau-b by explicit pair counting.
pub fn kendall_brute(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len();
    let (mut concordant, mut discordant, mut tie_x, mut tie_y) = (0i64, 0i64, 0i64, 0i64);
    for i in 0..n {
        for j in i + 1..n {
            let dx = x[i] - x[j];
            let dy = y[i] - y[j];
            if dx == 0.0 && dy == 0.0 {
                continue;
            } else if dx == 0.0 {
                tie_x += 1;
            } else if dy == 0.0 {
                tie_y += 1;
            } else if (dx > 0.0) == (dy > 0.0) {
                concordant += 1;
            } else {
                discordant += 1;
            }
        }
    }
    let n1 = (concordant + discordant + tie_x) as f64;
    let n2 = (concordant + discordant + tie_y) as f64;
    (concordant - discordant) as f64 / (n1 * n2).sqrt()
}

/// Two-pass textbook Pearson correlation.
pub fn pearson_textbook(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    sxy / (sxx * syy).sqrt()
}

/// 1-based ranks, ties get the mean of the positions they occupy; O(n^2).
pub fn ranks_textbook(v: &[f64]) -> Vec<f64> {
    v.iter()
        .map(|&a| {
            let below = v.iter().filter(|&&b| b < a).count() as f64;
            let equal = v.iter().filter(|&&b| b == a).count() as f64;
            below + (equal + 1.0) / 2.0
        })
        .collect()
}

pub fn spearman_textbook(x: &[f64], y: &[f64]) -> f64 {
    pearson_textbook(&ranks_textbook(x), &ranks_textbook(y))
}

/// 95% Fisher interval with the tabulated normal quantile.
pub fn fisher95_textbook(r: f64, n: usize) -> (f64, f64) {
    const Z975: f64 = 1.959_963_984_540_054;
    let z = r.atanh();
    let se = 1.0 / ((n as f64) - 3.0).sqrt();
    ((z - Z975 * se).tanh(), (z + Z975 * se).tanh())
}
