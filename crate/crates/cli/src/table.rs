use brahmi_net::EpochRecord;

/// One model's validation figures.
#[derive(Debug, Clone, PartialEq)]
pub struct TableRow {
    pub model: String,
    pub accuracy: f64,
    pub loss: f64,
}

impl TableRow {
    pub fn from_epoch(model: impl Into<String>, best: &EpochRecord) -> Self {
        Self {
            model: model.into(),
            accuracy: best.val_accuracy,
            loss: best.val_loss,
        }
    }
}

const HEADER: [&str; 3] = ["Model", "Validation Accuracy", "Validation Loss"];

/// Pipe table, accuracy as a percentage with two decimals and loss with four.
pub fn format_table(rows: &[TableRow]) -> String {
    let cells: Vec<[String; 3]> = rows
        .iter()
        .map(|r| [r.model.clone(), format!("{:.2}%", r.accuracy * 100.0), format!("{:.4}", r.loss)])
        .collect();
    let mut width = HEADER.map(str::len);
    for c in &cells {
        for (w, s) in width.iter_mut().zip(c) {
            *w = (*w).max(s.chars().count());
        }
    }
    let line = |c: [&str; 3]| {
        format!(
            "| {:<w0$} | {:>w1$} | {:>w2$} |\n",
            c[0],
            c[1],
            c[2],
            w0 = width[0],
            w1 = width[1],
            w2 = width[2]
        )
    };
    let mut s = line(HEADER);
    s.push_str(&format!(
        "|{}|{}:|{}:|\n",
        "-".repeat(width[0] + 2),
        "-".repeat(width[1] + 1),
        "-".repeat(width[2] + 1)
    ));
    for c in &cells {
        s.push_str(&line([&c[0], &c[1], &c[2]]));
    }
    s
}
