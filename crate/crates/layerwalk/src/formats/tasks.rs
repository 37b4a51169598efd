//! Probe task files: one JSON object per example.

use std::fmt::Write as _;
use std::path::Path;

use layerwalk_core::eval::{Example, Split, TaskDataset, TaskKind};
use layerwalk_core::graph::NodeId;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{atomic_write, read_string};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskLine {
    pub task: String,
    pub kind: TaskKind,
    pub year: i32,
    pub a: NodeId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<NodeId>,
    pub target: f64,
    pub split: Split,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub population_rate: Option<f64>,
}

pub fn to_string(tasks: &[TaskDataset]) -> String {
    let mut out = String::new();
    for t in tasks {
        for e in &t.examples {
            let line = TaskLine {
                task: t.name.clone(),
                kind: t.kind,
                year: t.year,
                a: e.a,
                b: e.b,
                target: e.target,
                split: e.split,
                population_rate: t.population_rate,
            };
            let _ = writeln!(out, "{}", serde_json::to_string(&line).expect("serializable task line"));
        }
    }
    out
}

pub fn write(path: &Path, tasks: &[TaskDataset]) -> Result<()> {
    atomic_write(path, to_string(tasks).as_bytes())
}

/// Groups lines into tasks in order of first appearance.
pub fn parse(path: &Path, text: &str) -> Result<Vec<TaskDataset>> {
    let mut tasks: Vec<TaskDataset> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        if raw.trim().is_empty() {
            continue;
        }
        let err = |message: String| Error::Parse { path: path.to_path_buf(), line: i + 1, message };
        let line: TaskLine = serde_json::from_str(raw).map_err(|e| err(e.to_string()))?;
        let idx = match tasks.iter().position(|t| t.name == line.task) {
            Some(idx) => idx,
            None => {
                tasks.push(TaskDataset {
                    name: line.task.clone(),
                    kind: line.kind,
                    year: line.year,
                    examples: Vec::new(),
                    population_rate: line.population_rate,
                });
                tasks.len() - 1
            }
        };
        let task = &mut tasks[idx];
        if task.kind != line.kind || task.year != line.year {
            return Err(err(format!("task {} mixes kinds or years", task.name)));
        }
        task.examples.push(Example { a: line.a, b: line.b, target: line.target, split: line.split });
    }
    for t in &tasks {
        t.validate().map_err(|e| Error::format(path, e.to_string()))?;
    }
    Ok(tasks)
}

pub fn read(path: &Path) -> Result<Vec<TaskDataset>> {
    parse(path, &read_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let tasks = vec![
            TaskDataset {
                name: "twins".into(),
                kind: TaskKind::PairBinary,
                year: 2009,
                examples: vec![
                    Example { a: 1, b: Some(2), target: 1.0, split: Split::Train },
                    Example { a: 3, b: Some(7), target: 0.0, split: Split::Test },
                ],
                population_rate: None,
            },
            TaskDataset {
                name: "income".into(),
                kind: TaskKind::NodeRegression,
                year: 2011,
                examples: vec![Example { a: 4, b: None, target: 10.25, split: Split::Val }],
                population_rate: Some(0.5),
            },
        ];
        let text = to_string(&tasks);
        assert_eq!(parse(Path::new("t.jsonl"), &text).unwrap(), tasks);
        let bad = text.replace("\"pair_binary\"", "\"node_binary\"");
        assert!(parse(Path::new("t.jsonl"), &bad).is_err());
    }
}
