//! JSON files: instances (`*.instance.json`), ground-truth tags and lottery
//! hints. Rationals are written as reduced `"p/q"` strings.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use super::GroundTruth;
use crate::error::{Error, Result};
use crate::model::{Instance, Lottery};

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

pub fn read_instance(path: impl AsRef<Path>) -> Result<Instance> {
    let path = path.as_ref();
    read_json(path).map_err(|e| match e {
        Error::Json(j) => Error::InvalidInstance(format!("{}: {j}", path.display())),
        other => other,
    })
}

pub fn write_instance(inst: &Instance, path: impl AsRef<Path>) -> Result<()> {
    write_json(inst, path.as_ref())
}

pub fn read_truth(path: impl AsRef<Path>) -> Result<GroundTruth> {
    read_json(path.as_ref())
}

pub fn write_truth(truth: &GroundTruth, path: impl AsRef<Path>) -> Result<()> {
    write_json(truth, path.as_ref())
}

/// A lottery hint file holds a JSON array of `"p/q"` strings.
pub fn read_lottery(path: impl AsRef<Path>) -> Result<Lottery> {
    read_json(path.as_ref())
}

pub fn write_lottery(x: &Lottery, path: impl AsRef<Path>) -> Result<()> {
    write_json(x, path.as_ref())
}

/// A permutation file holds a JSON array of agent indices.
pub fn read_permutation(path: impl AsRef<Path>) -> Result<Vec<usize>> {
    read_json(path.as_ref())
}

pub fn write_permutation(order: &[usize], path: impl AsRef<Path>) -> Result<()> {
    write_json(&order, path.as_ref())
}

/// `foo.instance.json` -> `foo.<kind>.json` beside it.
pub fn sidecar_path(instance_path: &Path, kind: &str) -> std::path::PathBuf {
    let name = instance_path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let stem = name
        .strip_suffix(".instance.json")
        .or_else(|| name.strip_suffix(".json"))
        .unwrap_or(&name);
    instance_path.with_file_name(format!("{stem}.{kind}.json"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::examples::example_2_3;
    use crate::instances::{generate, GeneratorSpec};
    use crate::rational::Rational;

    #[test]
    fn example_file_has_the_table_values() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ex.instance.json");
        write_instance(&example_2_3(), &path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.contains("\"inv_epsilon\": 10"));
        assert!(text.contains("\"3/5\""));
        let back = read_instance(&path).unwrap();
        assert_eq!(back, example_2_3());
        let u: Vec<Vec<String>> = back
            .agents()
            .iter()
            .map(|a| a.utilities.iter().map(Rational::to_string).collect())
            .collect();
        assert_eq!(
            u,
            vec![
                vec!["1/1", "3/5", "1/5"],
                vec!["1/5", "1/1", "1/2"],
                vec!["1/5", "1/5", "1/1"],
            ]
        );
        let tau: Vec<String> = back.agents().iter().map(|a| a.threshold.to_string()).collect();
        assert_eq!(tau, vec!["3/5", "7/10", "3/10"]);
    }

    #[test]
    fn generated_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        for seed in 0..10 {
            let g = generate(&GeneratorSpec::RandomInfeasible { n: 6, m: 3, inv_epsilon: 10, seed }).unwrap();
            let path = dir.path().join(format!("g{seed}.instance.json"));
            write_instance(&g.instance, &path).unwrap();
            assert_eq!(read_instance(&path).unwrap(), g.instance);
            let tpath = sidecar_path(&path, "truth");
            write_truth(&g.truth, &tpath).unwrap();
            assert_eq!(read_truth(&tpath).unwrap(), g.truth);
        }
    }

    #[test]
    fn zero_threshold_rejected_with_agent_index() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.instance.json");
        fs::write(
            &path,
            r#"{"m":2,"inv_epsilon":10,"agents":[{"u":["1","0"],"tau":"1/2"},{"u":["0","1"],"tau":"0"}]}"#,
        )
        .unwrap();
        let err = read_instance(&path).unwrap_err().to_string();
        assert!(err.contains("agent 1"), "{err}");
        fs::write(
            &path,
            r#"{"m":2,"inv_epsilon":10,"agents":[{"u":["1/3","0"],"tau":"1/2"}]}"#,
        )
        .unwrap();
        assert!(read_instance(&path).is_err());
    }

    #[test]
    fn sidecar_names() {
        assert_eq!(
            sidecar_path(Path::new("/tmp/a.instance.json"), "truth"),
            Path::new("/tmp/a.truth.json")
        );
        assert_eq!(sidecar_path(Path::new("b.json"), "hint"), Path::new("b.hint.json"));
    }
}
