//! Flat `key = value` run configuration.
//!
//! Blank lines and lines starting with `#` are ignored. Empty values leave a
//! path unset. Every key has a default; unknown keys are rejected.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context};
use nodctx_core::context::StructureClass;
use nodctx_core::stats::TTestVariant;
use nodctx_core::FilterRule;

use crate::error::CliError;

/// Keys and defaults, in the order they are echoed.
const DEFAULTS: &[(&str, &str)] = &[
    ("annotations_dir", ""),
    ("diagnosis_csv", ""),
    ("ct_dir", ""),
    ("mask_dir.lung", ""),
    ("mask_dir.airway", ""),
    ("mask_dir.vessel", ""),
    ("mask_dir.artery", ""),
    ("mask_dir.vein", ""),
    ("output_dir", "out"),
    ("train_list", ""),
    ("test_list", ""),
    ("tables_csv", ""),
    ("resample_spacing_mm", "1.0"),
    ("voi_min_radius_mm", "6.0"),
    ("filter.attach", "true"),
    ("filter.d_near_mm", "3.0"),
    ("filter.d_far_mm", "5.0"),
    ("filter.max_angle_deg", "15.0"),
    ("texture_solid_min", "4"),
    ("diameter_split_mm", "10.0"),
    ("cutoff.distance_mm", "1.0"),
    ("cutoff.airway.count_c1", "1"),
    ("cutoff.airway.count_c2", "1"),
    ("cutoff.airway.nvol_pct", "0.1"),
    ("cutoff.vessel.count_c1", "10"),
    ("cutoff.vessel.count_c2", "3"),
    ("cutoff.vessel.nvol_pct", "2.0"),
    ("cutoff.artery.count_c1", "10"),
    ("cutoff.artery.count_c2", "3"),
    ("cutoff.artery.nvol_pct", "2.0"),
    ("cutoff.vein.count_c1", "10"),
    ("cutoff.vein.count_c2", "3"),
    ("cutoff.vein.nvol_pct", "2.0"),
    ("stats.ttest", "pooled"),
    ("stats.haldane", "false"),
    ("model.choice", "2"),
    ("model.l2", "0.0001"),
    ("model.threshold", "0.5"),
    ("model.positive_weight", "1.0"),
    ("model.max_iter", "500"),
    ("workers", "0"),
    ("write_skeletons", "false"),
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cutoffs {
    pub count_c1: f64,
    pub count_c2: f64,
    pub nvol_pct: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelSettings {
    pub choice: u8,
    pub l2: f64,
    pub threshold: f64,
    pub positive_weight: f64,
    pub max_iter: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub annotations_dir: Option<PathBuf>,
    pub diagnosis_csv: Option<PathBuf>,
    pub ct_dir: Option<PathBuf>,
    pub mask_dirs: BTreeMap<String, PathBuf>,
    pub output_dir: PathBuf,
    pub train_list: Option<PathBuf>,
    pub test_list: Option<PathBuf>,
    pub tables_csv: Option<PathBuf>,
    pub resample_spacing_mm: f64,
    pub voi_min_radius_mm: f64,
    pub filter: FilterRule,
    pub texture_solid_min: f64,
    /// Eq. diameter separating small from large nodules.
    pub diameter_split_mm: f64,
    pub distance_cutoff_mm: f64,
    pub cutoffs: BTreeMap<StructureClass, Cutoffs>,
    pub ttest: TTestVariant,
    pub haldane: bool,
    pub model: ModelSettings,
    pub workers: usize,
    pub write_skeletons: bool,
    raw: BTreeMap<String, String>,
}

fn parse_lines(text: &str, origin: &str) -> anyhow::Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| anyhow!("{origin}:{}: expected key = value", n + 1))?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

fn num<T: std::str::FromStr>(raw: &BTreeMap<String, String>, key: &str) -> anyhow::Result<T> {
    raw[key]
        .parse()
        .map_err(|_| anyhow!("config key {key}: cannot parse {:?}", raw[key]))
}

fn flag(raw: &BTreeMap<String, String>, key: &str) -> anyhow::Result<bool> {
    match raw[key].to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        v => bail!("config key {key}: expected true or false, got {v:?}"),
    }
}

fn path(raw: &BTreeMap<String, String>, key: &str) -> Option<PathBuf> {
    let v = &raw[key];
    (!v.is_empty()).then(|| PathBuf::from(v))
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig::from_pairs(Vec::new()).expect("defaults are valid")
    }
}

impl RunConfig {
    /// Defaults, then the optional file, then `overrides` (`key=value`).
    pub fn load(file: Option<&Path>, overrides: &[String]) -> Result<Self, CliError> {
        let mut pairs = Vec::new();
        if let Some(f) = file {
            let text = std::fs::read_to_string(f)
                .with_context(|| format!("reading config {}", f.display()))
                .map_err(CliError::Input)?;
            pairs.extend(parse_lines(&text, &f.display().to_string()).map_err(CliError::Input)?);
        }
        for o in overrides {
            let (k, v) = o
                .split_once('=')
                .ok_or_else(|| CliError::Input(anyhow!("--set expects key=value, got {o:?}")))?;
            pairs.push((k.trim().to_string(), v.trim().to_string()));
        }
        RunConfig::from_pairs(pairs).map_err(CliError::Input)
    }

    pub fn from_pairs(pairs: Vec<(String, String)>) -> anyhow::Result<Self> {
        let mut raw: BTreeMap<String, String> =
            DEFAULTS.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
        for (k, v) in pairs {
            if !raw.contains_key(&k) {
                bail!("unknown config key {k:?}");
            }
            raw.insert(k, v);
        }

        let filter = FilterRule::new(
            flag(&raw, "filter.attach")?,
            num(&raw, "filter.d_near_mm")?,
            num(&raw, "filter.d_far_mm")?,
            num(&raw, "filter.max_angle_deg")?,
        )?;
        let mut cutoffs = BTreeMap::new();
        for class in StructureClass::ALL.into_iter().filter(|c| c.is_tubular()) {
            let key = |what: &str| format!("cutoff.{}.{what}", class.name());
            cutoffs.insert(
                class,
                Cutoffs {
                    count_c1: num(&raw, &key("count_c1"))?,
                    count_c2: num(&raw, &key("count_c2"))?,
                    nvol_pct: num(&raw, &key("nvol_pct"))?,
                },
            );
        }
        let ttest = match raw["stats.ttest"].as_str() {
            "pooled" => TTestVariant::Pooled,
            "welch" => TTestVariant::Welch,
            v => bail!("config key stats.ttest: expected pooled or welch, got {v:?}"),
        };
        let choice: u8 = num(&raw, "model.choice")?;
        if choice != 1 && choice != 2 {
            bail!("config key model.choice must be 1 or 2, got {choice}");
        }
        let model = ModelSettings {
            choice,
            l2: num(&raw, "model.l2")?,
            threshold: num(&raw, "model.threshold")?,
            positive_weight: num(&raw, "model.positive_weight")?,
            max_iter: num(&raw, "model.max_iter")?,
        };
        if !(model.l2 >= 0.0) || !(model.positive_weight > 0.0) {
            bail!("model.l2 must be >= 0 and model.positive_weight > 0");
        }
        let resample_spacing_mm: f64 = num(&raw, "resample_spacing_mm")?;
        if !(resample_spacing_mm > 0.0) {
            bail!("resample_spacing_mm must be positive");
        }
        let voi_min_radius_mm: f64 = num(&raw, "voi_min_radius_mm")?;
        if !(voi_min_radius_mm > 0.0) {
            bail!("voi_min_radius_mm must be positive");
        }

        let mut mask_dirs = BTreeMap::new();
        for k in ["lung", "airway", "vessel", "artery", "vein"] {
            if let Some(p) = path(&raw, &format!("mask_dir.{k}")) {
                mask_dirs.insert(k.to_string(), p);
            }
        }
        Ok(RunConfig {
            annotations_dir: path(&raw, "annotations_dir"),
            diagnosis_csv: path(&raw, "diagnosis_csv"),
            ct_dir: path(&raw, "ct_dir"),
            mask_dirs,
            output_dir: PathBuf::from(&raw["output_dir"]),
            train_list: path(&raw, "train_list"),
            test_list: path(&raw, "test_list"),
            tables_csv: path(&raw, "tables_csv"),
            resample_spacing_mm,
            voi_min_radius_mm,
            filter,
            texture_solid_min: num(&raw, "texture_solid_min")?,
            diameter_split_mm: num(&raw, "diameter_split_mm")?,
            distance_cutoff_mm: num(&raw, "cutoff.distance_mm")?,
            cutoffs,
            ttest,
            haldane: flag(&raw, "stats.haldane")?,
            model,
            workers: num(&raw, "workers")?,
            write_skeletons: flag(&raw, "write_skeletons")?,
            raw,
        })
    }

    /// The effective configuration in the file format, one key per line.
    pub fn render(&self) -> String {
        let mut s = String::new();
        for (k, _) in DEFAULTS {
            let _ = writeln!(s, "{k} = {}", self.raw[*k]);
        }
        s
    }

    /// Write the effective configuration next to the outputs of `command`.
    pub fn echo(&self, command: &str) -> Result<(), CliError> {
        let dir = &self.output_dir;
        std::fs::create_dir_all(dir)
            .with_context(|| format!("creating {}", dir.display()))
            .map_err(CliError::Input)?;
        let p = dir.join(format!("run_config.{command}.txt"));
        std::fs::write(&p, format!("# nodctx {command}\n{}", self.render()))
            .with_context(|| format!("writing {}", p.display()))
            .map_err(CliError::Input)
    }

    pub fn mask_dir(&self, name: &str) -> Option<&Path> {
        self.mask_dirs.get(name).map(PathBuf::as_path)
    }

    pub fn require<'a>(&self, p: &'a Option<PathBuf>, key: &str) -> Result<&'a Path, CliError> {
        p.as_deref()
            .ok_or_else(|| CliError::Input(anyhow!("config key {key} is required for this command")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let c = RunConfig::default();
        assert_eq!(c.resample_spacing_mm, 1.0);
        assert_eq!(c.voi_min_radius_mm, 6.0);
        assert_eq!(c.filter, FilterRule::default());
        assert_eq!(c.distance_cutoff_mm, 1.0);
        assert_eq!(c.cutoffs[&StructureClass::Airway].count_c1, 1.0);
        assert_eq!(c.cutoffs[&StructureClass::Airway].nvol_pct, 0.1);
        assert_eq!(c.cutoffs[&StructureClass::Vessel].count_c1, 10.0);
        assert_eq!(c.cutoffs[&StructureClass::Vessel].count_c2, 3.0);
        assert_eq!(c.cutoffs[&StructureClass::Vein].nvol_pct, 2.0);
        assert_eq!(c.model.l2, 1e-4);
        assert_eq!(c.model.choice, 2);
        assert_eq!(c.texture_solid_min, 4.0);
    }

    #[test]
    fn file_then_overrides() {
        let pairs = parse_lines("# comment\n\nfilter.d_near_mm = 2.5\nmodel.choice=1\n", "t").unwrap();
        let mut all = pairs;
        all.push(("model.choice".into(), "2".into()));
        let c = RunConfig::from_pairs(all).unwrap();
        assert_eq!(c.filter.d_near, 2.5);
        assert_eq!(c.model.choice, 2);
    }

    #[test]
    fn rejects_unknown_and_malformed() {
        assert!(RunConfig::from_pairs(vec![("nope".into(), "1".into())]).is_err());
        assert!(RunConfig::from_pairs(vec![("model.choice".into(), "3".into())]).is_err());
        assert!(RunConfig::from_pairs(vec![("filter.d_far_mm".into(), "x".into())]).is_err());
        assert!(parse_lines("no equals sign", "t").is_err());
    }

    #[test]
    fn render_round_trips() {
        let c = RunConfig::from_pairs(vec![("workers".into(), "3".into())]).unwrap();
        let again = RunConfig::from_pairs(parse_lines(&c.render(), "t").unwrap()).unwrap();
        assert_eq!(c, again);
    }
}
