//! Compensated summation.
//!
//! The logical-spin layers produce energies whose physically relevant part
//! sits many orders of magnitude below the constant intra-gadget energy, so
//! residuals are accumulated with Neumaier's variant of Kahan summation.

/// Running sum carrying a compensation term for lost low-order bits.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn add_sum(&mut self, other: &CompensatedSum) {
        self.add(other.sum);
        self.add(other.comp);
    }

    pub fn sub_sum(&mut self, other: &CompensatedSum) {
        self.add(-other.sum);
        self.add(-other.comp);
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }

    /// High and low parts; `hi + lo` is the compensated value.
    pub fn parts(&self) -> (f64, f64) {
        (self.sum, self.comp)
    }

    pub fn from_parts(hi: f64, lo: f64) -> Self {
        Self { sum: hi, comp: lo }
    }
}

impl Extend<f64> for CompensatedSum {
    fn extend<I: IntoIterator<Item = f64>>(&mut self, iter: I) {
        for x in iter {
            self.add(x);
        }
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = Self::new();
        s.extend(iter);
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_cancelled_low_bits() {
        let s: CompensatedSum = [1e16, 1.0, -1e16].into_iter().collect();
        assert_eq!(s.value(), 1.0);
        let naive: f64 = [1e16, 1.0, -1e16].iter().sum();
        assert_eq!(naive, 0.0);
    }

    #[test]
    fn subtracting_itself_is_zero() {
        let a: CompensatedSum = [0.1, 0.2, 0.3, 1e-20].into_iter().collect();
        let mut b = a;
        b.sub_sum(&a);
        assert_eq!(b.value(), 0.0);
    }
}
