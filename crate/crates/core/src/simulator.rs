//! Synthetic KPI series: a product of daily, weekly and monthly sines with
//! contiguous anomaly windows, min-max scaling and clipped multiplicative
//! Gaussian noise.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Deserializer, Serialize};

use crate::timeseries::{min_max_scale, ScaleParams, TimeSeries};
use crate::{samples_per, AnomalyClass, Direction, Error, Label, Result, MINUTES_PER_DAY};

/// Minimum margin between the end of an anomaly and the end of its window.
pub const MARGIN: usize = 5;
/// Ratio between the generator standard deviation and the resulting noise level.
pub const NOISE_LEVEL_FACTOR: f64 = 2.31;
/// Redraws allowed when a window cannot host its anomaly.
pub const MAX_PLAN_RETRIES: usize = 100;

/// Amplitudes, periods (minutes) and means of the three seasonal factors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaseSignalParams {
    pub amplitudes: [f64; 3],
    pub periods: [f64; 3],
    pub means: [f64; 3],
}

impl Default for BaseSignalParams {
    fn default() -> Self {
        Self {
            amplitudes: [0.5, 0.1, 0.05],
            periods: [1440.0, 10080.0, 40320.0],
            means: [0.5, 0.9, 0.95],
        }
    }
}

impl BaseSignalParams {
    pub fn validate(&self) -> Result<()> {
        for s in 0..3 {
            if (self.amplitudes[s] + self.means[s] - 1.0).abs() > 1e-12 {
                return Err(Error::invalid(format!(
                    "amplitude and mean of factor {s} must add up to 1"
                )));
            }
            if !(self.periods[s] > 0.0) || self.amplitudes[s] < 0.0 {
                return Err(Error::invalid(format!("factor {s} has a non-positive period")));
            }
        }
        Ok(())
    }
}

/// `X(t) = prod_s (A_s sin(2 pi t / T_s) + mu_s)` with `t` in minutes.
///
/// The phase is reduced modulo each period first, so integer timestamps one
/// full period apart give bit-identical values.
pub fn base_signal(params: &BaseSignalParams, t: f64) -> f64 {
    (0..3)
        .map(|s| {
            let period = params.periods[s];
            let phase = t.rem_euclid(period) / period;
            params.amplitudes[s] * (2.0 * PI * phase).sin() + params.means[s]
        })
        .product()
}

/// Samples the base signal at `t0 + i * ts` for `i in 0..len`.
pub fn sample_base(params: &BaseSignalParams, len: usize, t0: i64, ts: u32) -> Result<TimeSeries> {
    let values = (0..len)
        .map(|i| base_signal(params, (t0 + i as i64 * ts as i64) as f64))
        .collect();
    TimeSeries::new(values, t0, ts)
}

/// Probability for each of the eight subclasses.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Proportions(BTreeMap<Label, f64>);

impl Proportions {
    pub fn new(map: BTreeMap<Label, f64>) -> Result<Self> {
        let p = Proportions(map);
        p.validate()?;
        Ok(p)
    }

    /// Builds from a vector in [`Label::SUBCLASSES`] order.
    pub fn from_vector(weights: [f64; 8]) -> Result<Self> {
        Self::new(Label::SUBCLASSES.iter().copied().zip(weights).collect())
    }

    pub fn balanced() -> Self {
        Proportions(Label::SUBCLASSES.iter().map(|&l| (l, 0.125)).collect())
    }

    /// Class mix observed in human-labelled real windows.
    pub fn imbalanced() -> Self {
        let w = [0.43, 0.02, 0.38, 0.02, 0.005, 0.005, 0.1, 0.04];
        Proportions(Label::SUBCLASSES.iter().copied().zip(w).collect())
    }

    pub fn get(&self, label: Label) -> f64 {
        self.0.get(&label).copied().unwrap_or(0.0)
    }

    /// Weights in [`Label::SUBCLASSES`] order.
    pub fn vector(&self) -> [f64; 8] {
        let mut out = [0.0; 8];
        for (slot, label) in out.iter_mut().zip(Label::SUBCLASSES) {
            *slot = self.get(label);
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        if self.0.contains_key(&Label::Other) {
            return Err(Error::invalid("proportions cannot include `other`"));
        }
        if self.0.values().any(|&p| !(p >= 0.0) || !p.is_finite()) {
            return Err(Error::invalid("proportions must be non-negative"));
        }
        let sum: f64 = self.0.values().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!("proportions sum to {sum}, expected 1")));
        }
        Ok(())
    }

    /// Draws a subclass by inverse CDF over [`Label::SUBCLASSES`] order.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Label {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut last = Label::SUBCLASSES[0];
        for label in Label::SUBCLASSES {
            let p = self.get(label);
            if p <= 0.0 {
                continue;
            }
            acc += p;
            last = label;
            if u < acc {
                return label;
            }
        }
        last
    }
}

impl Default for Proportions {
    fn default() -> Self {
        Self::balanced()
    }
}

impl<'de> Deserialize<'de> for Proportions {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Preset(String),
            Vector([f64; 8]),
            Map(BTreeMap<Label, f64>),
        }
        let p = match Repr::deserialize(deserializer)? {
            Repr::Preset(name) => match name.as_str() {
                "balanced" => Proportions::balanced(),
                "imbalanced" => Proportions::imbalanced(),
                other => {
                    return Err(serde::de::Error::custom(format!("unknown proportion preset `{other}`")))
                }
            },
            Repr::Vector(v) => Proportions(Label::SUBCLASSES.iter().copied().zip(v).collect()),
            Repr::Map(m) => Proportions(m),
        };
        p.validate().map_err(serde::de::Error::custom)?;
        Ok(p)
    }
}

/// Simulation parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    /// Number of anomalies (and anomaly windows).
    pub n: usize,
    /// Sampling period in minutes.
    pub ts: u32,
    /// Target noise level of the final, scaled series.
    pub noise_sigma: f64,
    pub proportions: Proportions,
    /// Bounds of the strength factor `Z`, with `alpha = A_d * Z`.
    pub strength_range: (f64, f64),
    pub seed: u64,
    pub base: BaseSignalParams,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            n: 250,
            ts: 5,
            noise_sigma: 0.0,
            proportions: Proportions::balanced(),
            strength_range: (0.5, 0.7),
            seed: 0,
            base: BaseSignalParams::default(),
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::invalid("n must be at least 1"));
        }
        samples_per(MINUTES_PER_DAY, self.ts)?;
        if !(self.noise_sigma >= 0.0) {
            return Err(Error::invalid("noise_sigma must be non-negative"));
        }
        let (lo, hi) = self.strength_range;
        if !(lo < hi) || lo < 0.0 {
            return Err(Error::invalid("strength_range must satisfy 0 <= z_lo < z_hi"));
        }
        self.proportions.validate()?;
        self.base.validate()
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let cfg: SimConfig = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Ground truth for one injected anomaly. Indices are global sample indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnomalyRecord {
    pub subclass: Label,
    pub class: AnomalyClass,
    pub direction: Direction,
    /// First index of the anomaly window.
    pub i_w: usize,
    /// Window length `2Y` in samples.
    pub window_len: usize,
    /// First index of the anomaly.
    pub i_a: usize,
    pub lambda: usize,
    /// Strength in base-signal units, before scaling.
    pub alpha: f64,
    /// Max minus min of the base signal over the day holding `i_a`.
    pub daily_amplitude: f64,
    /// `(i_b, i_c)` for temporary changes and level shifts.
    pub breakpoints: Option<(usize, usize)>,
    /// `(alpha_1, alpha_2)` for temporary changes and level shifts.
    pub levels: Option<(f64, f64)>,
}

impl AnomalyRecord {
    /// Inclusive index range touched by the injection.
    pub fn span(&self) -> (usize, usize) {
        match self.class {
            AnomalyClass::SinglePoint => (self.i_a, self.i_a),
            _ => (self.i_a, self.i_a + self.lambda),
        }
    }

    pub fn window_end(&self) -> usize {
        self.i_w + self.window_len
    }

    /// True when the inclusive span intersects `[start, end)`.
    pub fn intersects(&self, start: i64, end: i64) -> bool {
        let (a, b) = self.span();
        (a as i64) < end && (b as i64) >= start
    }

    /// Number of span indices inside `[start, end)`.
    pub fn overlap(&self, start: i64, end: i64) -> usize {
        let (a, b) = self.span();
        let lo = (a as i64).max(start);
        let hi = (b as i64 + 1).min(end);
        (hi - lo).max(0) as usize
    }

    /// Checks the layout invariants.
    pub fn validate(&self) -> Result<()> {
        if self.i_a < self.i_w || self.i_a + self.lambda + MARGIN > self.i_w + self.window_len {
            return Err(Error::Internal(format!("record at {} violates window bounds", self.i_a)));
        }
        if self.lambda < self.class.min_length()
            || (self.class == AnomalyClass::SinglePoint && self.lambda != 1)
        {
            return Err(Error::Internal(format!("record at {} has invalid length", self.i_a)));
        }
        Ok(())
    }
}

/// Lays out `cfg.n` contiguous anomaly windows and draws class, window size,
/// start and length of each anomaly. Strength and shape are left unset.
pub fn plan_windows<R: Rng + ?Sized>(cfg: &SimConfig, rng: &mut R) -> Result<Vec<AnomalyRecord>> {
    cfg.validate()?;
    let mut records = Vec::with_capacity(cfg.n);
    let mut i_w = 0usize;
    for _ in 0..cfg.n {
        let subclass = cfg.proportions.sample(rng);
        let (class, direction) = subclass.subclass().expect("proportions exclude `other`");
        let (l_min, l_max) = class.half_window_bounds();
        let mut placed = None;
        for _ in 0..MAX_PLAN_RETRIES {
            let y = rng.random_range(l_min..=l_max);
            let window_len = 2 * y;
            let last = i_w + window_len - MARGIN;
            let i_a = rng.random_range(i_w..=last);
            let i_e = rng.random_range(i_a..=last);
            let lambda = match class {
                AnomalyClass::SinglePoint => 1,
                _ => (i_e - i_a).max(class.min_length()),
            };
            if i_a + lambda <= last {
                placed = Some((window_len, i_a, lambda));
                break;
            }
        }
        let (window_len, i_a, lambda) = placed.ok_or_else(|| {
            Error::Internal(format!("could not place a {class} anomaly after {MAX_PLAN_RETRIES} draws"))
        })?;
        records.push(AnomalyRecord {
            subclass,
            class,
            direction,
            i_w,
            window_len,
            i_a,
            lambda,
            alpha: 0.0,
            daily_amplitude: 0.0,
            breakpoints: None,
            levels: None,
        });
        i_w += window_len;
    }
    Ok(records)
}

/// Max minus min of `x` over the calendar day holding `i_a`.
///
/// Days are aligned to minute 0 of the base signal.
pub fn daily_amplitude(x: &TimeSeries, i_a: usize) -> Result<f64> {
    let spd = samples_per(MINUTES_PER_DAY, x.ts())?;
    if x.len() < spd {
        return Err(Error::insufficient(format!(
            "series of {} samples is shorter than one day ({spd} samples)",
            x.len()
        )));
    }
    if i_a >= x.len() {
        return Err(Error::invalid(format!("index {i_a} out of bounds")));
    }
    let phase = (x.t0().rem_euclid(MINUTES_PER_DAY as i64) / x.ts() as i64) as usize;
    let start = ((i_a + phase) / spd * spd) as i64 - phase as i64;
    let end = start + spd as i64;
    if start < 0 || end > x.len() as i64 {
        return Err(Error::insufficient(format!(
            "the day holding index {i_a} is not fully covered by the series"
        )));
    }
    let day = &x.values()[start as usize..end as usize];
    let hi = day.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = day.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(hi - lo)
}

/// Draws breakpoints and plateau levels for temporary changes and level
/// shifts. Requires `rec.alpha` to be set.
///
/// Breakpoints are interior: `i_a < i_b <= i_a + lambda/2` and
/// `i_b < i_c < i_a + lambda`, so every segment of the offset has positive
/// length.
pub fn sample_shape<R: Rng + ?Sized>(rec: &mut AnomalyRecord, rng: &mut R) -> Result<()> {
    match rec.class {
        AnomalyClass::SinglePoint | AnomalyClass::VariationChange => Ok(()),
        AnomalyClass::TemporaryChange | AnomalyClass::LevelShift => {
            if rec.lambda < 3 {
                return Err(Error::Internal(format!("lambda {} too short for a ramp", rec.lambda)));
            }
            let i_b = rng.random_range(rec.i_a + 1..=rec.i_a + rec.lambda / 2);
            let i_c = rng.random_range(i_b + 1..=rec.i_a + rec.lambda - 1);
            rec.breakpoints = Some((i_b, i_c));
            let alpha = rec.alpha;
            rec.levels = Some(if rec.class == AnomalyClass::LevelShift {
                (alpha, alpha)
            } else {
                let lo = 0.4_f64.min(alpha);
                let other = if lo < alpha { rng.random_range(lo..alpha) } else { alpha };
                if rng.random_bool(0.5) {
                    (alpha, other)
                } else {
                    (other, alpha)
                }
            });
            Ok(())
        }
    }
}

/// Piecewise-linear offset through `(i_a, 0)`, `(i_b, a1)`, `(i_c, a2)` and
/// `(i_a + lambda, 0)`; zero outside. Exact at every breakpoint.
pub fn ramp_offset(i: usize, i_a: usize, lambda: usize, breakpoints: (usize, usize), levels: (f64, f64)) -> f64 {
    let (i_b, i_c) = breakpoints;
    let (a1, a2) = levels;
    let end = i_a + lambda;
    if i <= i_a || i >= end {
        return 0.0;
    }
    let frac = |from: usize, to: usize| (i - from) as f64 / (to - from) as f64;
    if i <= i_b {
        a1 * frac(i_a, i_b)
    } else if i <= i_c {
        if a1 == a2 {
            a1
        } else {
            let f = frac(i_b, i_c);
            a1 * (1.0 - f) + a2 * f
        }
    } else {
        a2 * (1.0 - frac(i_c, end))
    }
}

/// Signed offset the record adds at index `i`, given the clean value there.
pub fn anomaly_offset(rec: &AnomalyRecord, i: usize, clean: f64) -> Result<f64> {
    let sign = rec.direction.sign();
    Ok(match rec.class {
        AnomalyClass::SinglePoint => {
            if i == rec.i_a {
                sign * rec.alpha
            } else {
                0.0
            }
        }
        AnomalyClass::TemporaryChange | AnomalyClass::LevelShift => {
            let (bp, levels) = match (rec.breakpoints, rec.levels) {
                (Some(bp), Some(levels)) => (bp, levels),
                _ => return Err(Error::Internal("ramp anomaly without breakpoints".into())),
            };
            let (i_b, i_c) = bp;
            if !(rec.i_a < i_b && i_b < i_c && i_c < rec.i_a + rec.lambda) {
                return Err(Error::Internal(format!("breakpoints {bp:?} out of order")));
            }
            sign * ramp_offset(i, rec.i_a, rec.lambda, bp, levels)
        }
        AnomalyClass::VariationChange => {
            if i >= rec.i_a && i <= rec.i_a + rec.lambda {
                sign * clean * rec.alpha
            } else {
                0.0
            }
        }
    })
}

/// Applies one anomaly to `x`. Shape parameters must already be drawn.
pub fn inject(x: &TimeSeries, rec: &AnomalyRecord) -> Result<TimeSeries> {
    let (a, b) = rec.span();
    if b >= x.len() {
        return Err(Error::invalid(format!("anomaly span [{a}, {b}] exceeds series length {}", x.len())));
    }
    let mut values = x.values().to_vec();
    for (i, v) in values.iter_mut().enumerate().take(b + 1).skip(a) {
        *v += anomaly_offset(rec, i, *v)?;
    }
    x.with_values(values)
}

/// Draws the shape of `rec` and applies it, returning the completed record.
pub fn inject_with_rng<R: Rng + ?Sized>(
    x: &TimeSeries,
    rec: &AnomalyRecord,
    rng: &mut R,
) -> Result<(TimeSeries, AnomalyRecord)> {
    let mut rec = rec.clone();
    sample_shape(&mut rec, rng)?;
    let out = inject(x, &rec)?;
    Ok((out, rec))
}

/// True for classes whose span is exempt from noise.
pub fn noise_exempt(class: AnomalyClass) -> bool {
    matches!(class, AnomalyClass::SinglePoint | AnomalyClass::TemporaryChange)
}

/// Adds `base(i) * clip(W, -4 s, 4 s)` with `W ~ N(0, s)`, `s = 2.31 sigma`,
/// except on the spans of single point and temporary change anomalies.
///
/// One Gaussian draw is consumed per index whether or not it is used.
pub fn add_noise<R: Rng + ?Sized>(
    x_tilde: &TimeSeries,
    base: &TimeSeries,
    records: &[AnomalyRecord],
    sigma: f64,
    rng: &mut R,
) -> Result<TimeSeries> {
    if !(sigma >= 0.0) {
        return Err(Error::invalid("sigma must be non-negative"));
    }
    if base.len() != x_tilde.len() {
        return Err(Error::invalid("base and anomalous series differ in length"));
    }
    let gen_std = NOISE_LEVEL_FACTOR * sigma;
    let normal = Normal::new(0.0, gen_std).map_err(|e| Error::invalid(e.to_string()))?;
    let clip = 4.0 * gen_std;
    let mut exempt = vec![false; x_tilde.len()];
    for rec in records.iter().filter(|r| noise_exempt(r.class)) {
        let (a, b) = rec.span();
        for e in exempt.iter_mut().take((b + 1).min(x_tilde.len())).skip(a) {
            *e = true;
        }
    }
    let values = x_tilde
        .values()
        .iter()
        .zip(base.values())
        .zip(exempt)
        .map(|((&v, &clean), exempt)| {
            let w: f64 = normal.sample(rng);
            if exempt || gen_std == 0.0 {
                v
            } else {
                v + clean * w.clamp(-clip, clip)
            }
        })
        .collect();
    x_tilde.with_values(values)
}

/// Output of [`simulate`].
#[derive(Debug, Clone)]
pub struct Simulation {
    /// Final scaled and noised series.
    pub series: TimeSeries,
    /// Scaled anomaly-free base signal.
    pub base: TimeSeries,
    /// Scaled series with anomalies and without noise.
    pub anomalous: TimeSeries,
    pub records: Vec<AnomalyRecord>,
    pub scale: ScaleParams,
}

/// Plans windows, samples the base signal, injects every anomaly, scales to
/// `[0.02, 1]` and adds noise.
pub fn simulate(cfg: &SimConfig) -> Result<Simulation> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut records = plan_windows(cfg, &mut rng)?;
    let len: usize = records.iter().map(|r| r.window_len).sum();
    let spd = samples_per(MINUTES_PER_DAY, cfg.ts)?;
    let covered = len.div_ceil(spd) * spd;
    let base_days = sample_base(&cfg.base, covered, 0, cfg.ts)?;
    let base = base_days.slice(0, len)?;

    let (z_lo, z_hi) = cfg.strength_range;
    let mut values = base.values().to_vec();
    for rec in records.iter_mut() {
        rec.daily_amplitude = daily_amplitude(&base_days, rec.i_a)?;
        rec.alpha = rec.daily_amplitude * rng.random_range(z_lo..z_hi);
        sample_shape(rec, &mut rng)?;
        rec.validate()?;
        let (a, b) = rec.span();
        for (i, v) in values.iter_mut().enumerate().take(b + 1).skip(a) {
            *v += anomaly_offset(rec, i, *v)?;
        }
    }
    let anomalous_raw = base.with_values(values)?;
    let scale = ScaleParams::fit(&anomalous_raw)?;
    let anomalous = min_max_scale(&anomalous_raw, &scale)?;
    let base_scaled = scale.transform(&base)?;
    let series = add_noise(&anomalous, &base_scaled, &records, cfg.noise_sigma, &mut rng)?;
    Ok(Simulation { series, base: base_scaled, anomalous, records, scale })
}

/// Anomaly-free scaled base signal of `len` samples with noise level `sigma`.
pub fn simulate_clean(len: usize, ts: u32, sigma: f64, seed: u64) -> Result<TimeSeries> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base = sample_base(&BaseSignalParams::default(), len, 0, ts)?;
    let scale = ScaleParams::fit(&base)?;
    let scaled = min_max_scale(&base, &scale)?;
    add_noise(&scaled, &scaled, &[], sigma, &mut rng)
}

pub fn write_records_json(records: &[AnomalyRecord], path: impl AsRef<Path>) -> Result<()> {
    let file = std::fs::File::create(path)?;
    serde_json::to_writer_pretty(std::io::BufWriter::new(file), records)?;
    Ok(())
}

pub fn read_records_json(path: impl AsRef<Path>) -> Result<Vec<AnomalyRecord>> {
    let file = std::fs::File::open(path)?;
    Ok(serde_json::from_reader(std::io::BufReader::new(file))?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn ramp_record(class: AnomalyClass, i_a: usize, lambda: usize, alpha: f64) -> AnomalyRecord {
        AnomalyRecord {
            subclass: Label::new(class, Direction::Growth),
            class,
            direction: Direction::Growth,
            i_w: 0,
            window_len: i_a + lambda + MARGIN + 10,
            i_a,
            lambda,
            alpha,
            daily_amplitude: 1.0,
            breakpoints: None,
            levels: None,
        }
    }

    #[test]
    fn base_signal_at_origin() {
        let p = BaseSignalParams::default();
        assert_eq!(base_signal(&p, 0.0), 0.5 * 0.9 * 0.95);
    }

    #[test]
    fn base_signal_at_six_hours() {
        // Independent evaluation: sin(pi/2) = 1, sin(2 pi 360/10080) = sin(pi/14),
        // sin(2 pi 360/40320) = sin(pi/56).
        let expected = 1.0
            * (0.1 * (PI / 14.0).sin() + 0.9)
            * (0.05 * (PI / 56.0).sin() + 0.95);
        let got = base_signal(&BaseSignalParams::default(), 360.0);
        assert!((got - expected).abs() < 1e-15);
        assert!((got - 0.8787).abs() < 5e-5);
    }

    #[test]
    fn base_signal_is_bounded_and_periodic() {
        let p = BaseSignalParams::default();
        for t in (0..3 * 40320).step_by(7) {
            let v = base_signal(&p, t as f64);
            assert!((0.0..=1.0).contains(&v));
            assert_eq!(v, base_signal(&p, (t + 40320) as f64));
        }
    }

    #[test]
    fn proportions_validate_sum_and_vocabulary() {
        assert!(Proportions::from_vector([0.5, 0.5, 0.1, 0.0, 0.0, 0.0, 0.0, 0.0]).is_err());
        let mut m = Proportions::balanced().0;
        m.insert(Label::Other, 0.0);
        assert!(Proportions::new(m).is_err());
        let json = r#""imbalanced""#;
        let p: Proportions = serde_json::from_str(json).unwrap();
        assert_eq!(p, Proportions::imbalanced());
        let p: Proportions = serde_json::from_str(r#"{"single_point_peak": 1.0}"#).unwrap();
        assert_eq!(p.get(Label::SinglePointPeak), 1.0);
    }

    #[test]
    fn plan_respects_layout() {
        let cfg = SimConfig { n: 400, ..SimConfig::default() };
        let recs = plan_windows(&cfg, &mut rng(3)).unwrap();
        assert_eq!(recs.len(), 400);
        let mut expected_start = 0;
        for r in &recs {
            assert_eq!(r.i_w, expected_start);
            expected_start += r.window_len;
            assert!(r.i_a >= r.i_w);
            assert!(r.i_a + r.lambda <= r.i_w + r.window_len - MARGIN);
            let (lo, hi) = r.class.half_window_bounds();
            assert!(r.window_len >= 2 * lo && r.window_len <= 2 * hi);
            if r.class == AnomalyClass::SinglePoint {
                assert_eq!(r.lambda, 1);
            } else {
                assert!(r.lambda >= 3);
            }
        }
    }

    #[test]
    fn plan_frequencies_match_proportions() {
        // Pearson chi-square over 10,000 draws, 7 degrees of freedom.
        let cfg = SimConfig { n: 10_000, ..SimConfig::default() };
        let recs = plan_windows(&cfg, &mut rng(11)).unwrap();
        let mut counts = BTreeMap::new();
        for r in &recs {
            *counts.entry(r.subclass).or_insert(0usize) += 1;
        }
        let expected = 10_000.0 / 8.0;
        let chi2: f64 = Label::SUBCLASSES
            .iter()
            .map(|l| {
                let o = *counts.get(l).unwrap_or(&0) as f64;
                (o - expected).powi(2) / expected
            })
            .sum();
        assert!(chi2 < 24.32, "chi-square {chi2} above the 0.999 quantile");
    }

    #[test]
    fn daily_amplitude_examples() {
        let flat = TimeSeries::from_values(vec![0.3; 288], 5).unwrap();
        assert_eq!(daily_amplitude(&flat, 10).unwrap(), 0.0);
        let sine: Vec<f64> =
            (0..288).map(|i| 0.5 * (2.0 * PI * (i * 5) as f64 / 1440.0).sin() + 0.5).collect();
        let brute = sine.iter().cloned().fold(f64::MIN, f64::max) - sine.iter().cloned().fold(f64::MAX, f64::min);
        let x = TimeSeries::from_values(sine, 5).unwrap();
        let ad = daily_amplitude(&x, 100).unwrap();
        assert_eq!(ad, brute);
        assert!((ad - 1.0).abs() < 1e-9);
        let short = TimeSeries::from_values(vec![0.0; 100], 5).unwrap();
        assert!(daily_amplitude(&short, 0).is_err());
        let base = sample_base(&BaseSignalParams::default(), 288, 0, 5).unwrap();
        let ad = daily_amplitude(&base, 0).unwrap();
        assert!(ad > 0.0 && ad <= 1.0);
    }

    #[test]
    fn single_point_touches_one_index() {
        let x = TimeSeries::from_values((0..50).map(|i| 0.01 * i as f64).collect(), 5).unwrap();
        let mut rec = ramp_record(AnomalyClass::SinglePoint, 20, 1, 0.3);
        rec.subclass = Label::SinglePointPeak;
        let y = inject(&x, &rec).unwrap();
        for i in 0..50 {
            if i == 20 {
                assert_eq!(y.values()[i] - x.values()[i], 0.3);
            } else {
                assert_eq!(y.values()[i], x.values()[i]);
            }
        }
        rec.direction = Direction::Decrease;
        let zero = TimeSeries::from_values(vec![0.0; 50], 5).unwrap();
        assert_eq!(inject(&zero, &rec).unwrap().values()[20], -0.3);
    }

    #[test]
    fn ramp_breakpoints_are_exact() {
        let zero = TimeSeries::from_values(vec![0.0; 200], 5).unwrap();
        for seed in 0..200 {
            let mut r = rng(seed);
            let lambda = r.random_range(3..120);
            let rec = ramp_record(AnomalyClass::TemporaryChange, 30, lambda, 0.63);
            let (y, rec) = inject_with_rng(&zero, &rec, &mut r).unwrap();
            let (i_b, i_c) = rec.breakpoints.unwrap();
            let (a1, a2) = rec.levels.unwrap();
            assert!(a1 == 0.63 || a2 == 0.63);
            let v = y.values();
            assert_eq!(v[30], 0.0);
            assert_eq!(v[30 + lambda], 0.0);
            assert_eq!(v[i_b], a1);
            assert_eq!(v[i_c], a2);
            // Linear between breakpoints.
            for (from, to, lo, hi) in [(30, i_b, 0.0, a1), (i_b, i_c, a1, a2), (i_c, 30 + lambda, a2, 0.0)] {
                for i in from..=to {
                    let f = (i - from) as f64 / (to - from) as f64;
                    assert!((v[i] - (lo + (hi - lo) * f)).abs() < 1e-12);
                }
            }
            assert!(v[..30].iter().all(|&x| x == 0.0));
            assert!(v[31 + lambda..].iter().all(|&x| x == 0.0));
        }
    }

    #[test]
    fn level_shift_is_equal_level_temporary_change() {
        let x = sample_base(&BaseSignalParams::default(), 600, 0, 5).unwrap();
        let mut ls = ramp_record(AnomalyClass::LevelShift, 100, 300, 0.55);
        sample_shape(&mut ls, &mut rng(5)).unwrap();
        let mut tc = ls.clone();
        tc.class = AnomalyClass::TemporaryChange;
        tc.levels = Some((0.55, 0.55));
        let a = inject(&x, &ls).unwrap();
        let b = inject(&x, &tc).unwrap();
        assert_eq!(a.values(), b.values());
        let (i_b, i_c) = ls.breakpoints.unwrap();
        assert!((a.values()[i_b] - x.values()[i_b] - 0.55).abs() < 1e-12);
        assert!((a.values()[i_c] - x.values()[i_c] - 0.55).abs() < 1e-12);
    }

    #[test]
    fn variation_change_is_multiplicative() {
        let x = TimeSeries::from_values((0..100).map(|i| 0.2 + 0.005 * i as f64).collect(), 5).unwrap();
        let rec = ramp_record(AnomalyClass::VariationChange, 40, 20, 0.6);
        let y = inject(&x, &rec).unwrap();
        for i in 0..100 {
            let ratio = y.values()[i] / x.values()[i];
            if (40..=60).contains(&i) {
                assert!((ratio - 1.6).abs() < 1e-12);
            } else {
                assert_eq!(ratio, 1.0);
            }
        }
    }

    #[test]
    fn missing_breakpoints_is_an_internal_error() {
        let x = TimeSeries::from_values(vec![0.0; 100], 5).unwrap();
        let rec = ramp_record(AnomalyClass::TemporaryChange, 10, 20, 0.5);
        assert!(matches!(inject(&x, &rec), Err(Error::Internal(_))));
    }

    #[test]
    fn zero_noise_is_identity() {
        let x = sample_base(&BaseSignalParams::default(), 500, 0, 5).unwrap();
        let y = add_noise(&x, &x, &[], 0.0, &mut rng(1)).unwrap();
        assert_eq!(x, y);
    }

    #[test]
    fn noise_is_clipped_and_exempt_on_spans() {
        let x = sample_base(&BaseSignalParams::default(), 2000, 0, 5).unwrap();
        let sp = ramp_record(AnomalyClass::SinglePoint, 100, 1, 0.5);
        let mut tc = ramp_record(AnomalyClass::TemporaryChange, 300, 50, 0.5);
        tc.breakpoints = Some((310, 320));
        tc.levels = Some((0.5, 0.45));
        let ls = ramp_record(AnomalyClass::LevelShift, 900, 50, 0.5);
        let sigma = 0.2;
        let y = add_noise(&x, &x, &[sp, tc, ls], sigma, &mut rng(2)).unwrap();
        let bound = 4.0 * NOISE_LEVEL_FACTOR * sigma;
        for i in 0..2000 {
            let d = y.values()[i] - x.values()[i];
            assert!(d.abs() <= x.values()[i] * bound + 1e-15);
            if i == 100 || (300..=350).contains(&i) {
                assert_eq!(d, 0.0);
            }
        }
        assert!((900..=950).any(|i| y.values()[i] != x.values()[i]));
    }

    #[test]
    fn simulate_is_deterministic_and_contiguous() {
        let cfg = SimConfig { n: 30, seed: 9, noise_sigma: 0.02, ..SimConfig::default() };
        let a = simulate(&cfg).unwrap();
        let b = simulate(&cfg).unwrap();
        assert_eq!(a.series, b.series);
        assert_eq!(a.records, b.records);
        let total: usize = a.records.iter().map(|r| r.window_len).sum();
        assert_eq!(a.series.len(), total);
        for r in &a.records {
            let z = r.alpha / r.daily_amplitude;
            assert!((0.5..=0.7).contains(&z));
            r.validate().unwrap();
        }
        assert_eq!(a.anomalous.min(), 0.02);
        assert_eq!(a.anomalous.max(), 1.0);
    }

    #[test]
    fn records_serialise_subclass_as_string() {
        let cfg = SimConfig { n: 3, seed: 1, ..SimConfig::default() };
        let sim = simulate(&cfg).unwrap();
        let json = serde_json::to_value(&sim.records).unwrap();
        for (v, r) in json.as_array().unwrap().iter().zip(&sim.records) {
            assert_eq!(v["subclass"], r.subclass.as_str());
            assert!(v.get("lambda").is_some() && v.get("i_w").is_some());
        }
    }
}
