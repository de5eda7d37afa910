/// A fixed collection of parameter arrays, visited in a stable order.
///
/// Gradients use the same type as the parameters they belong to, so the two
/// lists always line up slice for slice.
pub trait ParamSet {
    fn slices(&self) -> Vec<&[f64]>;
    fn slices_mut(&mut self) -> Vec<&mut [f64]>;

    fn num_params(&self) -> usize {
        self.slices().iter().map(|s| s.len()).sum()
    }

    /// Concatenation of every slice, in visiting order.
    fn to_flat(&self) -> Vec<f64> {
        self.slices().concat()
    }

    fn zero(&mut self) {
        for s in self.slices_mut() {
            s.iter_mut().for_each(|x| *x = 0.0);
        }
    }

    fn scale(&mut self, k: f64) {
        for s in self.slices_mut() {
            s.iter_mut().for_each(|x| *x *= k);
        }
    }

    /// Overwrites every parameter from a flat array; returns false on a length mismatch.
    fn load_flat(&mut self, flat: &[f64]) -> bool {
        if flat.len() != self.num_params() {
            return false;
        }
        let mut offset = 0;
        for s in self.slices_mut() {
            let n = s.len();
            s.copy_from_slice(&flat[offset..offset + n]);
            offset += n;
        }
        true
    }

    fn all_finite(&self) -> bool {
        self.slices().iter().all(|s| s.iter().all(|x| x.is_finite()))
    }
}
