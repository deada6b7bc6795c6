//! Plain-text learner checkpoints. Numbers are written with 17 significant
//! digits so a round trip is exact.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

use super::BaselineMap;

const MAGIC: &str = "sme-checkpoint 1";

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub theta: Matrix,
    pub sigma: Matrix,
    pub baseline: BaselineMap,
    pub episode: u64,
}

fn write_matrix(out: &mut impl Write, name: &str, m: &Matrix) -> std::io::Result<()> {
    writeln!(out, "{name} {} {}", m.rows(), m.cols())?;
    for r in 0..m.rows() {
        let row: Vec<String> = m.row(r).iter().map(|x| format!("{x:.16e}")).collect();
        writeln!(out, "{}", row.join(" "))?;
    }
    Ok(())
}

pub fn write_checkpoint(out: &mut impl Write, ckpt: &Checkpoint) -> Result<()> {
    writeln!(out, "{MAGIC}")?;
    writeln!(out, "episode {}", ckpt.episode)?;
    write_matrix(out, "theta", &ckpt.theta)?;
    write_matrix(out, "sigma", &ckpt.sigma)?;
    let wv = Matrix::from_vec(
        1,
        ckpt.baseline.weights.len(),
        ckpt.baseline.weights.clone(),
    )?;
    write_matrix(out, "baseline", &wv)?;
    Ok(())
}

struct Lines<R> {
    inner: std::io::Lines<R>,
    line: usize,
}

impl<R: BufRead> Lines<R> {
    fn next(&mut self) -> Result<String> {
        self.line += 1;
        match self.inner.next() {
            Some(l) => Ok(l?),
            None => Err(self.err("unexpected end of file")),
        }
    }

    fn err(&self, message: impl Into<String>) -> Error {
        Error::Parse {
            line: self.line,
            message: message.into(),
        }
    }

    fn header(&mut self, name: &str) -> Result<Vec<String>> {
        let l = self.next()?;
        let mut parts = l.split_whitespace();
        if parts.next() != Some(name) {
            return Err(self.err(format!("expected `{name}`")));
        }
        Ok(parts.map(str::to_string).collect())
    }

    fn matrix(&mut self, name: &str) -> Result<Matrix> {
        let dims = self.header(name)?;
        let parse_dim = |s: &String| s.parse::<usize>().ok();
        let (rows, cols) = match dims.as_slice() {
            [r, c] => match (parse_dim(r), parse_dim(c)) {
                (Some(r), Some(c)) => (r, c),
                _ => return Err(self.err("bad matrix shape")),
            },
            _ => return Err(self.err("expected `<name> <rows> <cols>`")),
        };
        let mut data = Vec::with_capacity(rows * cols);
        for _ in 0..rows {
            let l = self.next()?;
            let row: Vec<f64> = l
                .split_whitespace()
                .map(str::parse)
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| self.err(format!("bad number: {e}")))?;
            if row.len() != cols {
                return Err(self.err(format!("expected {cols} values, got {}", row.len())));
            }
            data.extend(row);
        }
        Matrix::from_vec(rows, cols, data)
    }
}

pub fn read_checkpoint(input: impl BufRead) -> Result<Checkpoint> {
    let mut lines = Lines {
        inner: input.lines(),
        line: 0,
    };
    if lines.next()?.trim() != MAGIC {
        return Err(lines.err("not a checkpoint file"));
    }
    let episode = match lines.header("episode")?.as_slice() {
        [n] => n.parse().map_err(|_| lines.err("bad episode counter"))?,
        _ => return Err(lines.err("expected `episode <n>`")),
    };
    let theta = lines.matrix("theta")?;
    let sigma = lines.matrix("sigma")?;
    theta.check_same_shape(&sigma)?;
    let wv = lines.matrix("baseline")?;
    Ok(Checkpoint {
        theta,
        sigma,
        baseline: BaselineMap::new(wv.into_vec()),
        episode,
    })
}
