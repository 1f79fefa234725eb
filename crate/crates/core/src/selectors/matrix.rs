use std::io;

use super::TaskId;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Unset,
    Measured,
    Predicted,
}

impl Provenance {
    pub fn as_str(&self) -> &'static str {
        match self {
            Provenance::Unset => "unset",
            Provenance::Measured => "measured",
            Provenance::Predicted => "predicted",
        }
    }
}

/// K×(K+1) transferability values; column K is the target.
#[derive(Debug, Clone, PartialEq)]
pub struct TransferMatrix {
    k: usize,
    values: Vec<f64>,
    provenance: Vec<Provenance>,
}

impl TransferMatrix {
    pub fn new(k: usize) -> Self {
        Self {
            k,
            values: vec![0.0; k * (k + 1)],
            provenance: vec![Provenance::Unset; k * (k + 1)],
        }
    }

    /// Number of source tasks; also the target's column index.
    pub fn sources(&self) -> usize {
        self.k
    }

    pub fn target(&self) -> TaskId {
        self.k
    }

    pub fn get(&self, i: TaskId, j: TaskId) -> f64 {
        self.values[i * (self.k + 1) + j]
    }

    pub fn provenance(&self, i: TaskId, j: TaskId) -> Provenance {
        self.provenance[i * (self.k + 1) + j]
    }

    pub fn set(&mut self, i: TaskId, j: TaskId, value: f64, p: Provenance) {
        let idx = i * (self.k + 1) + j;
        self.values[idx] = value;
        self.provenance[idx] = p;
    }

    /// Off-diagonal cells `(i, j)` in row-major order.
    pub fn cells(&self) -> Vec<(TaskId, TaskId)> {
        (0..self.k)
            .flat_map(|i| (0..=self.k).filter(move |&j| j != i).map(move |j| (i, j)))
            .collect()
    }

    pub fn count(&self, p: Provenance) -> usize {
        self.cells().iter().filter(|&&(i, j)| self.provenance(i, j) == p).count()
    }

    /// Writes `from,to,value,provenance` rows; the target is named `target`.
    pub fn write_csv<W: io::Write>(&self, w: W) -> csv::Result<()> {
        let mut out = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(w);
        out.write_record(["from", "to", "value", "provenance"])?;
        for (i, j) in self.cells() {
            let to = if j == self.k { "target".to_string() } else { j.to_string() };
            out.write_record([
                i.to_string(),
                to,
                self.get(i, j).to_string(),
                self.provenance(i, j).as_str().to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Backward greedy chain: the last task maximizes transfer into the target,
/// each earlier one maximizes transfer into its successor. Returned in
/// training order. Ties go to the lowest task id.
pub fn ltms_chain(f: &TransferMatrix, tasks: &[TaskId]) -> Vec<TaskId> {
    let mut unchosen: Vec<TaskId> = tasks.to_vec();
    unchosen.sort_unstable();
    unchosen.dedup();
    let mut backward = Vec::with_capacity(unchosen.len());
    let mut next = f.target();
    while !unchosen.is_empty() {
        let mut best = 0;
        for (pos, &i) in unchosen.iter().enumerate() {
            if f.get(i, next) > f.get(unchosen[best], next) {
                best = pos;
            }
        }
        let pick = unchosen.remove(best);
        backward.push(pick);
        next = pick;
    }
    backward.reverse();
    backward
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_traced_chain() {
        let mut f = TransferMatrix::new(3);
        for (i, v) in [5.0, 9.0, 1.0].into_iter().enumerate() {
            f.set(i, 3, v, Provenance::Measured);
        }
        f.set(0, 1, 2.0, Provenance::Measured);
        f.set(2, 1, 7.0, Provenance::Measured);
        f.set(0, 2, 4.0, Provenance::Measured);
        assert_eq!(ltms_chain(&f, &[0, 1, 2]), vec![0, 2, 1]);
    }

    #[test]
    fn single_and_tied() {
        let f = TransferMatrix::new(1);
        assert_eq!(ltms_chain(&f, &[0]), vec![0]);
        let f = TransferMatrix::new(4);
        assert_eq!(ltms_chain(&f, &[0, 1, 2, 3]), vec![3, 2, 1, 0]);
    }

    #[test]
    fn csv_layout() {
        let mut f = TransferMatrix::new(1);
        f.set(0, 1, 2.5, Provenance::Predicted);
        let mut buf = Vec::new();
        f.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "from,to,value,provenance\n0,target,2.5,predicted\n");
    }
}
