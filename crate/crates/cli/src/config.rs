//! Flat `section.key = value` configuration files.
//!
//! Blank lines and lines starting with `#` are ignored; a `#` after a value
//! starts a comment. Unknown keys, repeated keys, malformed values and range
//! violations are all collected and reported together, each with its key
//! and line. Relative paths resolve against the config file's directory.

use std::collections::HashMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use seqslam::pipeline::PipelineParams;
use seqslam::preprocess::Crop;
use seqslam::sweep::{range_values, SweepAxis, ThresholdScale};
use seqslam::Target;

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetConfig {
    pub reference_dir: PathBuf,
    pub reference_pattern: String,
    pub query_dir: PathBuf,
    pub query_pattern: String,
    /// Indices refer to the traverses after subsampling.
    pub ground_truth: Option<PathBuf>,
    pub reference_step: usize,
    pub query_step: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub axis: Option<SweepAxis>,
    pub values: Option<Vec<f64>>,
    pub target: Target,
    pub threshold_scale: ThresholdScale,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub dataset: DatasetConfig,
    pub params: PipelineParams,
    /// Overrides the tolerance in the ground truth file.
    pub tolerance: Option<usize>,
    pub sweep: SweepConfig,
    pub output_dir: PathBuf,
}

pub const DEFAULT_PATTERN: &str = "*";
pub const DEFAULT_OUTPUT_DIR: &str = "seqslam-out";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Issue {
    pub line: Option<usize>,
    pub key: String,
    pub message: String,
}

impl fmt::Display for Issue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(line) => write!(f, "line {line}: {}: {}", self.key, self.message),
            None => write!(f, "{}: {}", self.key, self.message),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub file: PathBuf,
    pub issues: Vec<Issue>,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: ", self.file.display())?;
        for (i, issue) in self.issues.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{issue}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigError {}

const KEYS: &[&str] = &[
    "dataset.reference_dir",
    "dataset.reference_pattern",
    "dataset.query_dir",
    "dataset.query_pattern",
    "dataset.ground_truth",
    "dataset.reference_step",
    "dataset.query_step",
    "preprocess.crop",
    "preprocess.width",
    "preprocess.height",
    "preprocess.patch_size",
    "enhance.r_norm",
    "search.method",
    "search.d_s",
    "search.v_min",
    "search.v_max",
    "search.v_step",
    "selection.method",
    "selection.lambda",
    "selection.mu",
    "selection.r_window",
    "evaluation.recall_denominator",
    "evaluation.tolerance",
    "sweep.axis",
    "sweep.values",
    "sweep.target",
    "sweep.threshold_scale",
    "output.dir",
];

/// Raw key/value pairs with their line numbers.
struct Entries {
    values: HashMap<&'static str, (usize, String)>,
    issues: Vec<Issue>,
}

impl Entries {
    fn parse(text: &str) -> Self {
        let mut values: HashMap<&'static str, (usize, String)> = HashMap::new();
        let mut issues = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let Some((key, value)) = content.split_once('=') else {
                issues.push(Issue {
                    line: Some(line),
                    key: content.to_string(),
                    message: "expected `section.key = value`".into(),
                });
                continue;
            };
            let (key, value) = (key.trim(), value.trim());
            match KEYS.iter().find(|k| **k == key) {
                None => issues.push(Issue {
                    line: Some(line),
                    key: key.to_string(),
                    message: "unknown key".into(),
                }),
                Some(&known) => {
                    if let Some((first, _)) = values.insert(known, (line, value.to_string())) {
                        issues.push(Issue {
                            line: Some(line),
                            key: key.to_string(),
                            message: format!("repeated key (first set on line {first})"),
                        });
                    }
                }
            }
        }
        Self { values, issues }
    }

    fn line(&self, key: &str) -> Option<usize> {
        self.values.get(key).map(|(l, _)| *l)
    }

    fn report(&mut self, key: &str, message: impl Into<String>) {
        self.issues.push(Issue {
            line: self.line(key),
            key: key.to_string(),
            message: message.into(),
        });
    }

    fn raw(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(|(_, v)| v.as_str())
    }

    /// Parsed value, or `None` (with an issue recorded) when malformed.
    fn get<T: FromStr>(&mut self, key: &str, kind: &str) -> Option<T>
    where
        T::Err: fmt::Display,
    {
        let raw = self.raw(key)?.to_string();
        match raw.parse::<T>() {
            Ok(v) => Some(v),
            Err(e) => {
                let msg = e.to_string();
                if msg.contains('`') {
                    self.report(key, msg);
                } else {
                    self.report(key, format!("expected {kind}, found `{raw}`"));
                }
                None
            }
        }
    }

    fn get_min(&mut self, key: &str, min: usize) -> Option<usize> {
        let v: usize = self.get(key, "a nonnegative integer")?;
        if v < min {
            self.report(key, format!("minimum {min}, got {v}"));
            return None;
        }
        Some(v)
    }

    fn get_f64(&mut self, key: &str) -> Option<f64> {
        let v: f64 = self.get(key, "a number")?;
        if !v.is_finite() {
            self.report(key, format!("must be finite, got {v}"));
            return None;
        }
        Some(v)
    }
}

fn parse_crop(raw: &str) -> Result<Crop, String> {
    let parts: Vec<usize> = raw
        .split(',')
        .map(|p| p.trim().parse::<usize>())
        .collect::<Result<_, _>>()
        .map_err(|_| format!("expected `left,top,right,bottom`, found `{raw}`"))?;
    match parts[..] {
        [left, top, right, bottom] if left < right && top < bottom => Ok(Crop {
            left,
            top,
            right,
            bottom,
        }),
        [_, _, _, _] => Err(format!("empty crop rectangle `{raw}`")),
        _ => Err(format!("expected `left,top,right,bottom`, found `{raw}`")),
    }
}

/// `a,b,c` or `start:stop:step`.
pub fn parse_values(raw: &str) -> Result<Vec<f64>, String> {
    if raw.contains(':') {
        let parts: Vec<f64> = raw
            .split(':')
            .map(|p| p.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|_| format!("expected `start:stop:step`, found `{raw}`"))?;
        let [start, stop, step] = parts[..] else {
            return Err(format!("expected `start:stop:step`, found `{raw}`"));
        };
        return range_values(start, stop, step).map_err(|e| e.to_string());
    }
    let values: Vec<f64> = raw
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| format!("expected comma-separated numbers, found `{raw}`"))?;
    if values.is_empty() {
        return Err("no values".into());
    }
    Ok(values)
}

fn resolve(base: &Path, raw: &str) -> PathBuf {
    let p = PathBuf::from(raw);
    if p.is_absolute() {
        p
    } else {
        base.join(p)
    }
}

/// Parses config text; `base` anchors relative paths and `file` labels
/// errors.
pub fn parse_config_str(text: &str, base: &Path, file: &Path) -> Result<PipelineConfig, ConfigError> {
    let mut e = Entries::parse(text);
    let mut p = PipelineParams::default();

    let required_path = |e: &mut Entries, key: &str| match e.raw(key) {
        Some(v) if !v.is_empty() => Some(resolve(base, v)),
        _ => {
            e.report(key, "required");
            None
        }
    };
    let reference_dir = required_path(&mut e, "dataset.reference_dir");
    let query_dir = required_path(&mut e, "dataset.query_dir");
    let pattern = |e: &Entries, key: &str| e.raw(key).unwrap_or(DEFAULT_PATTERN).to_string();
    let reference_pattern = pattern(&e, "dataset.reference_pattern");
    let query_pattern = pattern(&e, "dataset.query_pattern");
    let ground_truth = e.raw("dataset.ground_truth").map(|v| resolve(base, v));
    let reference_step = e.get_min("dataset.reference_step", 1).unwrap_or(1);
    let query_step = e.get_min("dataset.query_step", 1).unwrap_or(1);

    if let Some(raw) = e.raw("preprocess.crop").map(str::to_string) {
        match parse_crop(&raw) {
            Ok(c) => p.preprocess.crop = Some(c),
            Err(msg) => e.report("preprocess.crop", msg),
        }
    }
    if let Some(v) = e.get_min("preprocess.width", 1) {
        p.preprocess.target_width = v;
    }
    if let Some(v) = e.get_min("preprocess.height", 1) {
        p.preprocess.target_height = v;
    }
    if let Some(v) = e.get_min("preprocess.patch_size", 1) {
        p.preprocess.patch_size = v;
    }
    if p.preprocess.patch_size > p.preprocess.target_width.min(p.preprocess.target_height) {
        e.report(
            "preprocess.patch_size",
            format!(
                "patch size {} exceeds target {}x{}",
                p.preprocess.patch_size, p.preprocess.target_width, p.preprocess.target_height
            ),
        );
    }
    if let Some(v) = e.get_min("enhance.r_norm", 2) {
        p.r_norm = v;
    }

    if let Some(v) = e.get("search.method", "a search method") {
        p.search.method = v;
    }
    if let Some(v) = e.get_min("search.d_s", 2) {
        p.search.d_s = v;
    }
    if let Some(v) = e.get_f64("search.v_min") {
        p.search.v_min = v;
    }
    if let Some(v) = e.get_f64("search.v_max") {
        p.search.v_max = v;
    }
    if let Some(v) = e.get_f64("search.v_step") {
        p.search.v_step = v;
    }
    if p.search.v_min <= 0.0 {
        e.report("search.v_min", format!("must be positive, got {}", p.search.v_min));
    }
    if p.search.v_min > p.search.v_max {
        let key = if e.line("search.v_max").is_some() { "search.v_max" } else { "search.v_min" };
        e.report(key, format!("v_min > v_max ({} > {})", p.search.v_min, p.search.v_max));
    }
    if p.search.v_step <= 0.0 {
        e.report("search.v_step", format!("must be positive, got {}", p.search.v_step));
    }

    if let Some(v) = e.get("selection.method", "a selection method") {
        p.selection.method = v;
    }
    if let Some(v) = e.get_f64("selection.lambda") {
        p.selection.lambda = v;
    }
    if let Some(v) = e.get_f64("selection.mu") {
        if v < 1.0 {
            e.report("selection.mu", format!("minimum 1, got {v}"));
        }
        p.selection.mu = v;
    }
    if let Some(v) = e.get_min("selection.r_window", 1) {
        p.selection.r_window = v;
    }

    if let Some(v) = e.get("evaluation.recall_denominator", "eligible|all") {
        p.recall = v;
    }
    let tolerance = e.get("evaluation.tolerance", "a nonnegative integer");

    let mut sweep = SweepConfig {
        axis: e.get("sweep.axis", "a sweep axis"),
        values: None,
        target: e.get("sweep.target", "precision|recall|f1").unwrap_or(Target::F1),
        threshold_scale: e.get("sweep.threshold_scale", "relative|absolute").unwrap_or_default(),
    };
    if let Some(raw) = e.raw("sweep.values").map(str::to_string) {
        match parse_values(&raw) {
            Ok(v) => sweep.values = Some(v),
            Err(msg) => e.report("sweep.values", msg),
        }
    }
    let output_dir = resolve(base, e.raw("output.dir").unwrap_or(DEFAULT_OUTPUT_DIR));

    if e.issues.is_empty() {
        if let Err(err) = p.validate() {
            e.issues.push(Issue {
                line: None,
                key: "config".into(),
                message: err.to_string(),
            });
        }
    }
    if !e.issues.is_empty() {
        e.issues.sort_by_key(|i| i.line.unwrap_or(usize::MAX));
        return Err(ConfigError {
            file: file.to_path_buf(),
            issues: e.issues,
        });
    }
    Ok(PipelineConfig {
        dataset: DatasetConfig {
            reference_dir: reference_dir.expect("checked above"),
            reference_pattern,
            query_dir: query_dir.expect("checked above"),
            query_pattern,
            ground_truth,
            reference_step,
            query_step,
        },
        params: p,
        tolerance,
        sweep,
        output_dir,
    })
}

pub fn parse_config(file: &Path) -> Result<PipelineConfig, ConfigError> {
    let text = std::fs::read_to_string(file).map_err(|err| ConfigError {
        file: file.to_path_buf(),
        issues: vec![Issue {
            line: None,
            key: "file".into(),
            message: err.to_string(),
        }],
    })?;
    let base = file.parent().unwrap_or(Path::new("."));
    parse_config_str(&text, base, file)
}

#[cfg(test)]
mod tests {
    use super::*;
    use seqslam::search::SearchMethod;

    fn parse(text: &str) -> Result<PipelineConfig, ConfigError> {
        parse_config_str(text, Path::new("/data"), Path::new("test.cfg"))
    }

    const MINIMAL: &str = "dataset.reference_dir = ref\ndataset.query_dir = /abs/query\n";

    #[test]
    fn minimal_config_gets_defaults() {
        let c = parse(MINIMAL).unwrap();
        assert_eq!(c.params, PipelineParams::default());
        assert_eq!(c.params.search.d_s, 10);
        assert_eq!(c.dataset.reference_dir, PathBuf::from("/data/ref"));
        assert_eq!(c.dataset.query_dir, PathBuf::from("/abs/query"));
        assert_eq!(c.dataset.reference_pattern, "*");
        assert_eq!(c.output_dir, PathBuf::from("/data/seqslam-out"));
        assert_eq!(c.tolerance, None);
        assert_eq!(c.sweep.axis, None);
    }

    #[test]
    fn values_and_comments() {
        let text = format!(
            "{MINIMAL}# comment\nsearch.method = hybrid  # trailing\nsearch.d_s = 5\npreprocess.crop = 0,2,30,14\nsweep.values = 2:10:4\nsweep.axis = seq_length\n"
        );
        let c = parse(&text).unwrap();
        assert_eq!(c.params.search.method, SearchMethod::Hybrid);
        assert_eq!(c.params.search.d_s, 5);
        assert_eq!(c.params.preprocess.crop.unwrap().right, 30);
        assert_eq!(c.sweep.values, Some(vec![2.0, 6.0, 10.0]));
        assert_eq!(parse_values("2, 3,5").unwrap(), vec![2.0, 3.0, 5.0]);
    }

    #[test]
    fn velocity_order_is_checked() {
        let err = parse(&format!("{MINIMAL}search.v_min = 1.2\nsearch.v_max = 0.8\n")).unwrap_err();
        assert_eq!(err.issues.len(), 1);
        assert!(err.issues[0].message.contains("v_min > v_max"), "{err}");
        assert_eq!(err.issues[0].line, Some(4));
    }

    #[test]
    fn r_norm_floor() {
        let err = parse(&format!("{MINIMAL}enhance.r_norm = 1\n")).unwrap_err();
        assert!(err.to_string().contains("enhance.r_norm: minimum 2"), "{err}");
    }

    #[test]
    fn every_violation_reported() {
        let err = parse("dataset.reference_dir = a\nbogus.key = 1\nsearch.d_s = x\nsearch.d_s = 3\nnot a pair\n")
            .unwrap_err();
        let keys: Vec<&str> = err.issues.iter().map(|i| i.key.as_str()).collect();
        assert!(keys.contains(&"bogus.key"));
        assert!(keys.contains(&"search.d_s"));
        assert!(keys.contains(&"not a pair"));
        assert!(keys.contains(&"dataset.query_dir"));
        assert!(err.issues.iter().any(|i| i.message.contains("repeated")));
        assert!(!err.to_string().contains('\n'));
    }

    #[test]
    fn enum_errors_name_choices() {
        let err = parse(&format!("{MINIMAL}search.method = spiral\n")).unwrap_err();
        assert!(err.to_string().contains("trajectory|cone|hybrid"), "{err}");
    }
}
