//! Sampled signals.

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum WaveformError {
    #[error("waveform `{0}` is empty")]
    Empty(String),
    #[error("waveform `{label}`: {times} time points but {values} values")]
    LengthMismatch {
        label: String,
        times: usize,
        values: usize,
    },
    #[error("waveform `{label}`: time does not increase at sample {index}")]
    NotIncreasing { label: String, index: usize },
}

/// A signal sampled on a strictly increasing time axis, linear between
/// samples.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    pub label: String,
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

impl Waveform {
    pub fn new(
        label: impl Into<String>,
        times: Vec<f64>,
        values: Vec<f64>,
    ) -> Result<Self, WaveformError> {
        let label = label.into();
        if times.len() != values.len() {
            return Err(WaveformError::LengthMismatch {
                label,
                times: times.len(),
                values: values.len(),
            });
        }
        if times.is_empty() {
            return Err(WaveformError::Empty(label));
        }
        if let Some(i) = times.windows(2).position(|w| !(w[1] > w[0])) {
            return Err(WaveformError::NotIncreasing {
                label,
                index: i + 1,
            });
        }
        Ok(Self {
            label,
            times,
            values,
        })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn start(&self) -> f64 {
        self.times[0]
    }

    pub fn end(&self) -> f64 {
        self.times[self.times.len() - 1]
    }

    /// Linear interpolation, held constant outside the sampled range.
    pub fn value_at(&self, t: f64) -> f64 {
        let ts = &self.times;
        if t <= ts[0] {
            return self.values[0];
        }
        if t >= ts[ts.len() - 1] {
            return self.values[ts.len() - 1];
        }
        let k = ts.partition_point(|&x| x <= t);
        let (t0, t1) = (ts[k - 1], ts[k]);
        let (v0, v1) = (self.values[k - 1], self.values[k]);
        v0 + (v1 - v0) * (t - t0) / (t1 - t0)
    }

    /// Samples on a new time axis.
    pub fn resample(&self, times: &[f64]) -> Result<Waveform, WaveformError> {
        let values = times.iter().map(|&t| self.value_at(t)).collect();
        Waveform::new(self.label.clone(), times.to_vec(), values)
    }

    /// Restricts to `[t0, t1]`, inserting interpolated end points.
    pub fn window(&self, t0: f64, t1: f64) -> Result<Waveform, WaveformError> {
        let mut times = vec![t0];
        let mut values = vec![self.value_at(t0)];
        for (&t, &v) in self.times.iter().zip(&self.values) {
            if t > t0 && t < t1 {
                times.push(t);
                values.push(v);
            }
        }
        if t1 > t0 {
            times.push(t1);
            values.push(self.value_at(t1));
        }
        Waveform::new(self.label.clone(), times, values)
    }

    /// Trapezoidal integral over the whole waveform.
    pub fn integral(&self) -> f64 {
        self.times
            .windows(2)
            .zip(self.values.windows(2))
            .map(|(t, v)| 0.5 * (v[0] + v[1]) * (t[1] - t[0]))
            .sum()
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!("time,{}\n", self.label);
        for (t, v) in self.times.iter().zip(&self.values) {
            out.push_str(&format!("{t:e},{v:e}\n"));
        }
        out
    }
}
