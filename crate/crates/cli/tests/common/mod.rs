#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use seqslam::dataset::format_ground_truth;
use seqslam::synthetic::{write_traverse_pgm, SyntheticRoute};
use seqslam::GroundTruth;

/// A synthetic traverse pair on disk with identity ground truth.
pub struct Fixture {
    pub dir: tempfile::TempDir,
}

impl Fixture {
    pub fn new(frames: usize, seed: u64) -> Self {
        let dir = tempfile::tempdir().unwrap();
        let (reference, query) = SyntheticRoute {
            frames,
            ..SyntheticRoute::default()
        }
        .generate::<f64>(seed);
        write_traverse_pgm(&reference, &dir.path().join("ref")).unwrap();
        write_traverse_pgm(&query, &dir.path().join("query")).unwrap();
        let gt = GroundTruth::identity(frames, frames, 1);
        fs::write(dir.path().join("gt.csv"), format_ground_truth(&gt)).unwrap();
        Self { dir }
    }

    pub fn path(&self) -> &Path {
        self.dir.path()
    }

    /// Writes a config with dataset keys filled in plus `extra` lines.
    pub fn config(&self, name: &str, extra: &str) -> PathBuf {
        let text = format!(
            "dataset.reference_dir = ref\n\
             dataset.reference_pattern = *.pgm\n\
             dataset.query_dir = query\n\
             dataset.query_pattern = *.pgm\n\
             dataset.ground_truth = gt.csv\n\
             preprocess.width = 32\n\
             preprocess.height = 16\n\
             preprocess.patch_size = 8\n\
             {extra}"
        );
        let path = self.path().join(name);
        fs::write(&path, text).unwrap();
        path
    }
}

pub fn seqslam(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_seqslam"))
        .args(args)
        .output()
        .expect("binary runs")
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}
