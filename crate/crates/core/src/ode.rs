use std::ops::{Add, Mul};

/// Classic fourth-order Runge-Kutta stepper with reusable stage buffers.
pub(crate) struct Rk4<T> {
    k1: Vec<T>,
    k2: Vec<T>,
    k3: Vec<T>,
    k4: Vec<T>,
    tmp: Vec<T>,
}

impl<T> Rk4<T>
where
    T: Copy + Default + Add<Output = T> + Mul<f64, Output = T>,
{
    pub fn new(len: usize) -> Self {
        Self {
            k1: vec![T::default(); len],
            k2: vec![T::default(); len],
            k3: vec![T::default(); len],
            k4: vec![T::default(); len],
            tmp: vec![T::default(); len],
        }
    }

    /// Advances `y` from `t` to `t + dt`.
    pub fn step<F>(&mut self, y: &mut [T], t: f64, dt: f64, mut f: F)
    where
        F: FnMut(f64, &[T], &mut [T]),
    {
        let half = 0.5 * dt;
        f(t, y, &mut self.k1);
        for ((s, &y), &k) in self.tmp.iter_mut().zip(y.iter()).zip(&self.k1) {
            *s = y + k * half;
        }
        f(t + half, &self.tmp, &mut self.k2);
        for ((s, &y), &k) in self.tmp.iter_mut().zip(y.iter()).zip(&self.k2) {
            *s = y + k * half;
        }
        f(t + half, &self.tmp, &mut self.k3);
        for ((s, &y), &k) in self.tmp.iter_mut().zip(y.iter()).zip(&self.k3) {
            *s = y + k * dt;
        }
        f(t + dt, &self.tmp, &mut self.k4);
        let sixth = dt / 6.0;
        for (i, y) in y.iter_mut().enumerate() {
            *y = *y + (self.k1[i] + self.k2[i] * 2.0 + self.k3[i] * 2.0 + self.k4[i]) * sixth;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay_is_fourth_order() {
        let run = |dt: f64| {
            let mut y = [1.0f64];
            let mut rk = Rk4::new(1);
            let steps = (1.0 / dt).round() as usize;
            for i in 0..steps {
                rk.step(&mut y, i as f64 * dt, dt, |_, y, dy| dy[0] = -y[0]);
            }
            (y[0] - (-1.0f64).exp()).abs()
        };
        let ratio = run(0.1) / run(0.05);
        assert!((ratio - 16.0).abs() < 1.0, "ratio {ratio}");
    }
}
