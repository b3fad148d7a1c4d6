//! Compensated (Neumaier) summation for the long double sums in the
//! V-statistics, which keeps the algebraic identity checks tight even
//! for large samples.

#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct Acc {
    sum: f64,
    comp: f64,
}

impl Acc {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

pub(crate) fn sum<I: IntoIterator<Item = f64>>(it: I) -> f64 {
    let mut acc = Acc::new();
    for v in it {
        acc.add(v);
    }
    acc.value()
}
