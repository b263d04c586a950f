//! Run configuration: flat `section.key = value` text, layered as
//! built-in defaults < config file < `KSCONTROL_*` environment < flags.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use kscontrol_core::optimizer::SearchSchedule;
use kscontrol_core::tddft::EvolveParams;
use kscontrol_core::{
    DopingProfile, GoalKind, Grid, KernelRule, MixingScheme, Model, ModelParams, ProfileConstraints, ScfParams,
};

use crate::CliError;

pub const ENV_PREFIX: &str = "KSCONTROL_";

/// Every recognized key, in snapshot order.
pub const KEYS: &[&str] = &[
    "grid.x_min",
    "grid.x_max",
    "grid.dx",
    "model.positions",
    "model.sigma2",
    "model.d",
    "model.n_occ",
    "model.charge_min",
    "model.charge_max",
    "model.total_charge",
    "model.kernel_rule",
    "scf.mixing",
    "scf.tol",
    "scf.max_iter",
    "scf.extra_states",
    "scf.scheme",
    "scf.history",
    "schedule.p1",
    "schedule.n1",
    "schedule.steps",
    "schedule.seed",
    "tddft.dt",
    "tddft.t_final",
    "tddft.sample_every",
    "goal.kind",
    "goal.target",
    "run.profile",
    "run.output_dir",
];

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub x_min: f64,
    pub x_max: f64,
    pub dx: f64,
    pub positions: Vec<f64>,
    pub sigma2: f64,
    pub d: f64,
    pub n_occ: usize,
    pub charge_min: u8,
    pub charge_max: u8,
    pub total_charge: u32,
    pub kernel_rule: KernelRule,
    pub scf: ScfParams,
    pub schedule: SearchSchedule,
    pub tddft: EvolveParams,
    pub goal: String,
    pub target: Option<f64>,
    pub profile: Option<String>,
    pub output_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        let params = ModelParams::default();
        let constraints = ProfileConstraints::default();
        let grid = Grid::standard();
        Self {
            x_min: grid.x_min(),
            x_max: grid.x_max(),
            dx: grid.dx(),
            positions: params.positions,
            sigma2: params.sigma2,
            d: params.d,
            n_occ: params.n_occ,
            charge_min: constraints.min_charge,
            charge_max: constraints.max_charge,
            total_charge: constraints.total_charge,
            kernel_rule: KernelRule::default(),
            scf: ScfParams::default(),
            schedule: SearchSchedule::default(),
            tddft: EvolveParams::default(),
            goal: "charge-transfer".into(),
            target: None,
            profile: None,
            output_dir: PathBuf::from("kscontrol-out"),
        }
    }
}

fn invalid(key: &str, value: &str, reason: impl Display) -> CliError {
    CliError::Config(format!("{key} = {value:?}: {reason}"))
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, CliError>
where
    T::Err: Display,
{
    value.trim().parse::<T>().map_err(|e| invalid(key, value, e))
}

/// A float, or a ratio `a/b` such as `1/2000`.
fn parse_real(key: &str, value: &str) -> Result<f64, CliError> {
    let v = value.trim();
    let x = match v.split_once('/') {
        Some((a, b)) => parse::<f64>(key, a)? / parse::<f64>(key, b)?,
        None => parse::<f64>(key, v)?,
    };
    if x.is_finite() {
        Ok(x)
    } else {
        Err(invalid(key, value, "not a finite number"))
    }
}

fn fmt_real(x: f64) -> String {
    format!("{x:?}")
}

impl RunConfig {
    /// Sets one key from its text form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        let v = value.trim();
        match key {
            "grid.x_min" => self.x_min = parse_real(key, v)?,
            "grid.x_max" => self.x_max = parse_real(key, v)?,
            "grid.dx" => self.dx = parse_real(key, v)?,
            "model.positions" => {
                self.positions = v
                    .split(',')
                    .map(|p| parse_real(key, p))
                    .collect::<Result<Vec<_>, _>>()?
            }
            "model.sigma2" => self.sigma2 = parse_real(key, v)?,
            "model.d" => self.d = parse_real(key, v)?,
            "model.n_occ" => self.n_occ = parse(key, v)?,
            "model.charge_min" => self.charge_min = parse(key, v)?,
            "model.charge_max" => self.charge_max = parse(key, v)?,
            "model.total_charge" => self.total_charge = parse(key, v)?,
            "model.kernel_rule" => self.kernel_rule = parse(key, v)?,
            "scf.mixing" => self.scf.mixing = parse_real(key, v)?,
            "scf.tol" => self.scf.tol = parse_real(key, v)?,
            "scf.max_iter" => self.scf.max_iter = parse(key, v)?,
            "scf.extra_states" => self.scf.extra_states = parse(key, v)?,
            "scf.scheme" => {
                let history = match self.scf.scheme {
                    MixingScheme::Anderson { history } => history,
                    MixingScheme::Linear => 6,
                };
                self.scf.scheme = match v {
                    "anderson" => MixingScheme::Anderson { history },
                    "linear" => MixingScheme::Linear,
                    _ => return Err(invalid(key, value, "expected anderson or linear")),
                }
            }
            "scf.history" => {
                let history = parse(key, v)?;
                if let MixingScheme::Anderson { history: h } = &mut self.scf.scheme {
                    *h = history;
                }
            }
            "schedule.p1" => self.schedule.p1 = parse_real(key, v)?,
            "schedule.n1" => self.schedule.n1 = parse(key, v)?,
            "schedule.steps" => self.schedule.steps = parse(key, v)?,
            "schedule.seed" => self.schedule.seed = parse(key, v)?,
            "tddft.dt" => self.tddft.dt = parse_real(key, v)?,
            "tddft.t_final" => self.tddft.t_final = parse_real(key, v)?,
            "tddft.sample_every" => self.tddft.sample_every = parse(key, v)?,
            "goal.kind" => self.goal = v.to_string(),
            "goal.target" => {
                self.target = match v {
                    "" | "none" => None,
                    _ => Some(parse_real(key, v)?),
                }
            }
            "run.profile" => {
                self.profile = match v {
                    "" | "none" => None,
                    _ => Some(v.to_string()),
                }
            }
            "run.output_dir" => self.output_dir = PathBuf::from(v),
            _ => return Err(CliError::Config(format!("unknown configuration key {key:?}"))),
        }
        Ok(())
    }

    /// Applies a `key = value` file; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str, origin: &str) -> Result<(), CliError> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CliError::Config(format!("{origin}:{}: expected key = value, got {raw:?}", lineno + 1))
            })?;
            self.set(key.trim(), value.trim())
                .map_err(|e| CliError::Config(format!("{origin}:{}: {e}", lineno + 1)))?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<(), CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        self.apply_text(&text, &path.display().to_string())
    }

    /// `grid.dx` is read from `KSCONTROL_GRID_DX`, and so on.
    pub fn apply_env<I>(&mut self, vars: I) -> Result<(), CliError>
    where
        I: IntoIterator<Item = (String, String)>,
    {
        let by_name: BTreeMap<String, &str> = KEYS.iter().map(|k| (env_name(k), *k)).collect();
        let mut vars: Vec<(String, String)> = vars
            .into_iter()
            .filter(|(name, _)| name.starts_with(ENV_PREFIX))
            .collect();
        vars.sort();
        for (name, value) in vars {
            match by_name.get(&name) {
                Some(key) => self
                    .set(key, &value)
                    .map_err(|e| CliError::Config(format!("environment {name}: {e}")))?,
                None => return Err(CliError::Config(format!("unknown environment override {name}"))),
            }
        }
        Ok(())
    }

    /// Applies `key=value` override strings.
    pub fn apply_overrides(&mut self, overrides: &[String]) -> Result<(), CliError> {
        for item in overrides {
            let (key, value) = item
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("override {item:?} is not key=value")))?;
            self.set(key.trim(), value)?;
        }
        Ok(())
    }

    /// Current value of every key in text form; `set` accepts each back.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let (scheme, history) = match self.scf.scheme {
            MixingScheme::Anderson { history } => ("anderson", history),
            MixingScheme::Linear => ("linear", 0),
        };
        let positions = self.positions.iter().map(|p| fmt_real(*p)).collect::<Vec<_>>().join(",");
        let values = [
            fmt_real(self.x_min),
            fmt_real(self.x_max),
            fmt_real(self.dx),
            positions,
            fmt_real(self.sigma2),
            fmt_real(self.d),
            self.n_occ.to_string(),
            self.charge_min.to_string(),
            self.charge_max.to_string(),
            self.total_charge.to_string(),
            self.kernel_rule.as_str().to_string(),
            fmt_real(self.scf.mixing),
            fmt_real(self.scf.tol),
            self.scf.max_iter.to_string(),
            self.scf.extra_states.to_string(),
            scheme.to_string(),
            history.to_string(),
            fmt_real(self.schedule.p1),
            self.schedule.n1.to_string(),
            self.schedule.steps.to_string(),
            self.schedule.seed.to_string(),
            fmt_real(self.tddft.dt),
            fmt_real(self.tddft.t_final),
            self.tddft.sample_every.to_string(),
            self.goal.clone(),
            self.target.map_or("none".into(), fmt_real),
            self.profile.clone().unwrap_or_else(|| "none".into()),
            self.output_dir.display().to_string(),
        ];
        KEYS.iter().copied().zip(values).collect()
    }

    /// The configuration as `key = value` lines.
    pub fn to_text(&self) -> String {
        self.entries().iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    pub fn grid(&self) -> Result<Grid, CliError> {
        Grid::new(self.x_min, self.x_max, self.dx).map_err(config_error)
    }

    pub fn constraints(&self) -> ProfileConstraints {
        ProfileConstraints {
            atoms: self.positions.len(),
            min_charge: self.charge_min,
            max_charge: self.charge_max,
            total_charge: self.total_charge,
        }
    }

    pub fn model(&self) -> Result<Model, CliError> {
        let params = ModelParams {
            positions: self.positions.clone(),
            sigma2: self.sigma2,
            d: self.d,
            n_occ: self.n_occ,
        };
        Model::new(self.grid()?, params, self.constraints(), self.kernel_rule).map_err(config_error)
    }

    pub fn goal(&self) -> Result<GoalKind, CliError> {
        GoalKind::parse(&self.goal, self.target).map_err(config_error)
    }

    /// The configured profile, or the uniform one.
    pub fn profile(&self) -> Result<DopingProfile, CliError> {
        let constraints = self.constraints();
        match &self.profile {
            Some(s) => DopingProfile::parse(s, &constraints).map_err(config_error),
            None => constraints.uniform().map_err(config_error),
        }
    }

    /// Checks every invariant without building the kernel.
    pub fn validate(&self) -> Result<(), CliError> {
        let grid = self.grid()?;
        let params = ModelParams {
            positions: self.positions.clone(),
            sigma2: self.sigma2,
            d: self.d,
            n_occ: self.n_occ,
        };
        params.validate(&grid).map_err(config_error)?;
        let constraints = self.constraints();
        constraints.validate().map_err(config_error)?;
        if 2 * self.n_occ as u32 != self.total_charge {
            return Err(CliError::Config(format!(
                "model.n_occ = {}: {} electrons do not neutralize model.total_charge = {}",
                self.n_occ,
                2 * self.n_occ,
                self.total_charge
            )));
        }
        self.scf.validate().map_err(config_error)?;
        self.schedule.validate().map_err(config_error)?;
        self.tddft.validate().map_err(config_error)?;
        self.goal()?;
        self.profile()?;
        Ok(())
    }
}

fn config_error(e: kscontrol_core::Error) -> CliError {
    CliError::Config(e.to_string())
}

pub fn env_name(key: &str) -> String {
    format!("{ENV_PREFIX}{}", key.replace('.', "_").to_ascii_uppercase())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_the_chain_model() {
        let c = RunConfig::default();
        assert_eq!((c.x_min, c.x_max, c.dx), (-10.0, 10.0, 0.01));
        assert_eq!(c.d, 0.01);
        assert_eq!(c.sigma2, 1.0 / 2000.0);
        assert_eq!(c.tddft.dt, 0.002);
        assert_eq!(c.schedule.p1, 1.0 / 3.0);
        assert_eq!((c.schedule.n1, c.schedule.steps), (10, 4));
        assert_eq!(c.positions.len(), 20);
        assert_eq!(c.positions[0], -9.5);
        c.validate().unwrap();
        assert_eq!(c.profile().unwrap(), DopingProfile::carbon());
    }

    #[test]
    fn entries_round_trip() {
        let mut c = RunConfig::default();
        c.apply_overrides(&["goal.kind=bandgap-target".into(), "goal.target=3".into(), "scf.scheme=linear".into()])
            .unwrap();
        let mut back = RunConfig::default();
        back.apply_text(&c.to_text(), "snapshot").unwrap();
        assert_eq!(back, c);
        assert_eq!(c.entries().len(), KEYS.len());
    }

    #[test]
    fn file_then_env_then_overrides() {
        let mut c = RunConfig::default();
        c.apply_text("# comment\ngrid.dx = 0.02\nschedule.seed = 4\nmodel.sigma2 = 1/1000 # inline\n", "f")
            .unwrap();
        assert_eq!(c.dx, 0.02);
        assert_eq!(c.sigma2, 0.001);
        c.apply_env(vec![
            ("KSCONTROL_SCHEDULE_SEED".to_string(), "9".to_string()),
            ("PATH".to_string(), "/bin".to_string()),
        ])
        .unwrap();
        assert_eq!(c.schedule.seed, 9);
        c.apply_overrides(&["schedule.seed=11".into()]).unwrap();
        assert_eq!(c.schedule.seed, 11);
        assert_eq!(c.dx, 0.02);
    }

    #[test]
    fn errors_name_the_field() {
        let mut c = RunConfig::default();
        let e = c.set("grid.spacing", "1").unwrap_err().to_string();
        assert!(e.contains("grid.spacing"), "{e}");
        assert!(c.apply_env(vec![("KSCONTROL_GRID_SPACING".into(), "1".into())]).is_err());
        let e = c.apply_text("grid.dx 0.01", "cfg").unwrap_err().to_string();
        assert!(e.contains("cfg:1"), "{e}");
        let e = c.set("scf.max_iter", "-3").unwrap_err().to_string();
        assert!(e.contains("scf.max_iter"), "{e}");

        let mut bad = RunConfig::default();
        bad.set("grid.dx", "0.003").unwrap();
        let e = bad.validate().unwrap_err().to_string();
        assert!(e.contains("grid"), "{e}");

        let mut bad = RunConfig::default();
        bad.set("goal.kind", "bandgap-target").unwrap();
        assert!(bad.validate().is_err());
        bad.set("goal.target", "3.0").unwrap();
        bad.validate().unwrap();

        let mut bad = RunConfig::default();
        bad.set("model.n_occ", "59").unwrap();
        assert!(bad.validate().unwrap_err().to_string().contains("model.n_occ"));
    }

    #[test]
    fn profile_strings() {
        let mut c = RunConfig::default();
        c.set("run.profile", "75748566666666577476").unwrap();
        assert_eq!(c.profile().unwrap().charges()[..3], [7, 5, 7]);
        c.set("run.profile", "7574856666666657747").unwrap();
        assert!(c.profile().is_err());
        c.set("run.profile", "none").unwrap();
        assert_eq!(c.profile().unwrap(), DopingProfile::carbon());
    }

    #[test]
    fn env_names() {
        assert_eq!(env_name("grid.dx"), "KSCONTROL_GRID_DX");
        assert_eq!(env_name("schedule.seed"), "KSCONTROL_SCHEDULE_SEED");
    }
}
