#![allow(dead_code)]

use std::path::PathBuf;

pub fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

pub fn schema_path(domain: &str) -> PathBuf {
    data_dir().join(domain).join("schema.json")
}

pub fn goals_path(domain: &str, split: &str) -> PathBuf {
    data_dir().join(domain).join(format!("goals_{split}.json"))
}

/// Deterministic chain: states `0..N_CHAIN`, action 0 moves left (clamped
/// at 0), action 1 moves right. Stepping right out of the last state ends
/// the episode with reward 1; every other step pays 0.
pub const N_CHAIN: usize = 5;

pub fn chain_step(s: usize, a: usize) -> (Option<usize>, f64) {
    match a {
        0 => (Some(s.saturating_sub(1)), 0.0),
        _ if s + 1 == N_CHAIN => (None, 1.0),
        _ => (Some(s + 1), 0.0),
    }
}

/// Q* of the chain by value iteration, indexed `[state][action]`.
pub fn chain_value_iteration(gamma: f64) -> [[f64; 2]; N_CHAIN] {
    let mut q = [[0.0f64; 2]; N_CHAIN];
    loop {
        let mut next = q;
        for (s, row) in next.iter_mut().enumerate() {
            for (a, value) in row.iter_mut().enumerate() {
                let (s2, r) = chain_step(s, a);
                *value = r + s2.map_or(0.0, |s2| gamma * q[s2][0].max(q[s2][1]));
            }
        }
        let delta = next
            .iter()
            .flatten()
            .zip(q.iter().flatten())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        q = next;
        if delta < 1e-12 {
            return q;
        }
    }
}

pub fn one_hot(s: usize) -> Vec<f64> {
    let mut v = vec![0.0; N_CHAIN];
    v[s] = 1.0;
    v
}

pub struct CliOutput {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

/// Runs the built binary with `stdin` piped in.
pub fn gobot(args: &[&str], stdin: &str) -> CliOutput {
    use std::io::Write;
    use std::process::{Command, Stdio};
    let mut child = Command::new(env!("CARGO_BIN_EXE_gobot"))
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .expect("spawn gobot");
    // The child may exit before reading its input.
    let _ = child.stdin.take().unwrap().write_all(stdin.as_bytes());
    let out = child.wait_with_output().unwrap();
    CliOutput {
        code: out.status.code().unwrap_or(-1),
        stdout: String::from_utf8_lossy(&out.stdout).into_owned(),
        stderr: String::from_utf8_lossy(&out.stderr).into_owned(),
    }
}

pub fn p(path: &std::path::Path) -> &str {
    path.to_str().expect("utf-8 path")
}

fn read_all(dir: &std::path::Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_file())
        .map(|p| {
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                std::fs::read(&p).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}

/// Runs train, transfer, eval and a small experiment twice each with the
/// same seed in separate directories. Returns the names of files whose
/// bytes differ, or a failure message.
pub fn cli_reproducibility(root: &std::path::Path) -> Result<Vec<String>, String> {
    let movie = schema_path("movie");
    let restaurant = schema_path("restaurant");
    let movie_goals = goals_path("movie", "train");
    let goals = goals_path("restaurant", "train");
    let test = goals_path("restaurant", "test");
    let mut snapshots = Vec::new();
    for attempt in ["a", "b"] {
        let dir = root.join(attempt);
        std::fs::create_dir_all(&dir).unwrap();
        let f = |name: &str| dir.join(name).to_str().unwrap().to_string();
        let commands: Vec<Vec<String>> = vec![
            vec![
                "train".into(),
                "--schema".into(),
                p(&movie).into(),
                "--target-schema".into(),
                p(&restaurant).into(),
                "--goals".into(),
                p(&movie_goals).into(),
                "--epochs".into(),
                "2".into(),
                "--seed".into(),
                "9".into(),
                "--out".into(),
                f("source.json"),
            ],
            vec![
                "transfer".into(),
                "--source".into(),
                f("source.json"),
                "--source-schema".into(),
                p(&movie).into(),
                "--target-schema".into(),
                p(&restaurant).into(),
                "--seed".into(),
                "9".into(),
                "--out".into(),
                f("init.json"),
            ],
            vec![
                "train".into(),
                "--schema".into(),
                p(&restaurant).into(),
                "--source-schema".into(),
                p(&movie).into(),
                "--goals".into(),
                p(&goals).into(),
                "--test-goals".into(),
                p(&test).into(),
                "--weights".into(),
                f("init.json"),
                "--epochs".into(),
                "2".into(),
                "--seed".into(),
                "9".into(),
                "--out".into(),
                f("target.json"),
            ],
            vec![
                "eval".into(),
                "--schema".into(),
                p(&restaurant).into(),
                "--source-schema".into(),
                p(&movie).into(),
                "--goals".into(),
                p(&test).into(),
                "--weights".into(),
                f("target.json"),
                "--seed".into(),
                "9".into(),
                "--eval-epsilon".into(),
                "0.1".into(),
                "--n-per-goal".into(),
                "1".into(),
                "--trace".into(),
                f("trace.jsonl"),
                "--out".into(),
                f("eval.json"),
            ],
            vec![
                "experiment".into(),
                "--source-schema".into(),
                p(&movie).into(),
                "--target-schema".into(),
                p(&restaurant).into(),
                "--source-goals".into(),
                p(&movie_goals).into(),
                "--goals".into(),
                p(&goals).into(),
                "--test-goals".into(),
                p(&test).into(),
                "--seed".into(),
                "9".into(),
                "--repeats".into(),
                "2".into(),
                "--sizes".into(),
                "5".into(),
                "--epochs".into(),
                "1".into(),
                "--source-epochs".into(),
                "1".into(),
                "--out".into(),
                f("experiment"),
            ],
        ];
        for args in &commands {
            let args: Vec<&str> = args.iter().map(String::as_str).collect();
            let out = gobot(&args, "");
            if out.code != 0 {
                return Err(format!("`{}` exited {}: {}", args[0], out.code, out.stderr));
            }
        }
        let mut files = read_all(&dir);
        files.extend(
            read_all(&dir.join("experiment"))
                .into_iter()
                .map(|(n, b)| (format!("experiment/{n}"), b)),
        );
        snapshots.push(files);
    }
    let (a, b) = (&snapshots[0], &snapshots[1]);
    if a.len() != b.len() {
        return Err(format!("{} files versus {}", a.len(), b.len()));
    }
    Ok(a.iter()
        .zip(b)
        .filter(|(x, y)| x != y)
        .map(|(x, _)| x.0.clone())
        .collect())
}
