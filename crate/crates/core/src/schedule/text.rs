//! Plain-text schedule form:
//!
//! ```text
//! # total=70
//! 10,0.5,4
//! 20,1,2
//! 40,2,1
//! ```

use std::fmt::Write as _;
use std::str::FromStr;

use super::{Segment, StepSchedule};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

impl<F: Scalar> StepSchedule<F> {
    pub fn to_text(&self) -> String {
        let mut out = format!("# total={}\n", self.total_iters());
        for seg in self.segments() {
            // `{}` on floats prints the shortest string that round-trips.
            writeln!(out, "{},{},{}", seg.length, seg.sigma, seg.clip).unwrap();
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut declared_total = None;
        let mut segments = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                if let Some(v) = rest.trim().strip_prefix("total=") {
                    let total = v
                        .trim()
                        .parse::<usize>()
                        .map_err(|e| Error::parse(line_no, format!("bad total: {e}")))?;
                    declared_total = Some(total);
                }
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != 3 {
                return Err(Error::parse(
                    line_no,
                    format!("expected `length,sigma,clip`, got {} fields", fields.len()),
                ));
            }
            let length = fields[0]
                .parse::<usize>()
                .map_err(|e| Error::parse(line_no, format!("bad length: {e}")))?;
            let sigma = parse_scalar::<F>(fields[1], line_no, "sigma")?;
            let clip = parse_scalar::<F>(fields[2], line_no, "clip")?;
            segments.push(Segment::new(length, sigma, clip));
        }
        let total = declared_total.ok_or_else(|| Error::parse(1, "missing `# total=T` header"))?;
        let schedule = StepSchedule::from_segments(segments)?;
        if schedule.total_iters() != total {
            return Err(Error::parse(
                1,
                format!(
                    "header total {total} disagrees with segment sum {}",
                    schedule.total_iters()
                ),
            ));
        }
        Ok(schedule)
    }
}

fn parse_scalar<F: Scalar>(s: &str, line: usize, what: &str) -> Result<F> {
    let v = f64::from_str(s).map_err(|e| Error::parse(line, format!("bad {what}: {e}")))?;
    Ok(F::lit(v))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn text_layout() {
        let s = StepSchedule::from_segments(vec![
            Segment::new(10, 0.5, 4.0),
            Segment::new(20, 1.0, 2.0),
            Segment::new(40, 2.0, 1.0),
        ])
        .unwrap();
        assert_eq!(s.to_text(), "# total=70\n10,0.5,4\n20,1,2\n40,2,1\n");
    }

    #[test]
    fn rejects_bad_input() {
        assert!(StepSchedule::<f64>::from_text("10,1,1\n").is_err());
        assert!(StepSchedule::<f64>::from_text("# total=11\n10,1,1\n").is_err());
        assert!(StepSchedule::<f64>::from_text("# total=10\n10,1\n").is_err());
        let err = StepSchedule::<f64>::from_text("# total=10\n10,x,1\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
    }

    proptest! {
        #[test]
        fn round_trip(segs in prop::collection::vec((1usize..1000, 1e-3f64..1e3, 1e-3f64..1e3), 1..8)) {
            let s = StepSchedule::from_segments(
                segs.into_iter().map(|(l, a, b)| Segment::new(l, a, b)).collect()
            ).unwrap();
            prop_assert_eq!(StepSchedule::from_text(&s.to_text()).unwrap(), s);
        }
    }
}
