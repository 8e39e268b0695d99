//! Parsers for the standard MAPF benchmark `.map` / `.scen` file formats and
//! CSV serialization of experiment results.
//!
//! Coordinate convention: a scen entry's `(sx, sy)` is `(column, row)`, so it
//! maps directly onto [`Cell`]'s `(x, y)`. Worked example: the scen line
//! `0<TAB>empty-8-8.map<TAB>8<TAB>8<TAB>1<TAB>2<TAB>5<TAB>6<TAB>8.0` places the
//! start in column 1, row 2 and the goal in column 5, row 6. Getting this
//! transposed is the classic failure mode; the tests pin it down.

use std::fmt::Write as _;

use thiserror::Error;

use crate::domain::{AgentTask, Cell, GridMap};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ParseError {
    #[error("line {line}: {msg}")]
    Malformed { line: usize, msg: String },
    #[error("scenario has {got} entries, {wanted} requested")]
    NotEnoughEntries { wanted: usize, got: usize },
    #[error("line {line}: start or goal out of bounds")]
    EntryOutOfBounds { line: usize },
    #[error("line {line}: start or goal on a blocked cell")]
    EntryBlocked { line: usize },
    #[error("line {line}: scenario declares {scen_w}x{scen_h} but map is {map_w}x{map_h}")]
    DimensionMismatch {
        line: usize,
        scen_w: u32,
        scen_h: u32,
        map_w: u32,
        map_h: u32,
    },
    #[error("agents {0} and {1} share a start cell")]
    DuplicateStart(usize, usize),
    #[error("agents {0} and {1} share a goal cell")]
    DuplicateGoal(usize, usize),
}

fn err(line: usize, msg: impl Into<String>) -> ParseError {
    ParseError::Malformed {
        line,
        msg: msg.into(),
    }
}

/// One line of a scen file, verbatim.
#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioEntry {
    pub bucket: u32,
    pub map_name: String,
    pub map_width: u32,
    pub map_height: u32,
    pub start: Cell,
    pub goal: Cell,
    pub optimal_length: f64,
}

/// Parse a MovingAI `.map` file. `.` and `G` are unblocked; `@`, `O`, `T`,
/// `W` are blocked; anything else is an error naming the offending line.
pub fn parse_map(text: &str) -> Result<GridMap, ParseError> {
    let mut lines = text.lines().map(|l| l.trim_end_matches('\r')).enumerate();
    let mut expect = |want: &str| -> Result<(usize, String), ParseError> {
        match lines.next() {
            Some((i, line)) => Ok((i + 1, line.to_string())),
            None => Err(err(0, format!("missing `{want}` header line"))),
        }
    };

    let (n, line) = expect("type")?;
    if line != "type octile" {
        return Err(err(n, format!("expected `type octile`, found `{line}`")));
    }
    let (n, line) = expect("height")?;
    let height: u32 = line
        .strip_prefix("height ")
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| err(n, format!("expected `height <H>`, found `{line}`")))?;
    let (n, line) = expect("width")?;
    let width: u32 = line
        .strip_prefix("width ")
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| err(n, format!("expected `width <W>`, found `{line}`")))?;
    let (n, line) = expect("map")?;
    if line != "map" {
        return Err(err(n, format!("expected `map`, found `{line}`")));
    }
    if width == 0 || height == 0 {
        return Err(err(n, "map dimensions must be at least 1x1"));
    }

    let mut blocked = Vec::with_capacity((width as usize) * (height as usize));
    let mut rows = 0u32;
    for (i, line) in lines {
        let n = i + 1;
        if line.is_empty() {
            continue;
        }
        if rows == height {
            return Err(err(n, format!("more than {height} map rows")));
        }
        if line.len() != width as usize {
            return Err(err(
                n,
                format!("row has {} cells, expected {width}", line.len()),
            ));
        }
        for ch in line.chars() {
            match ch {
                '.' | 'G' => blocked.push(false),
                '@' | 'O' | 'T' | 'W' => blocked.push(true),
                other => return Err(err(n, format!("unknown cell character `{other}`"))),
            }
        }
        rows += 1;
    }
    if rows != height {
        return Err(err(
            4 + rows as usize,
            format!("found {rows} map rows, expected {height}"),
        ));
    }
    GridMap::new(width, height, blocked).map_err(|e| err(0, e.to_string()))
}

/// Serialize a grid back to map format (`.` / `@` cells, LF line endings).
/// Re-parsing the output yields an identical [`GridMap`].
pub fn write_map(map: &GridMap) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "type octile");
    let _ = writeln!(out, "height {}", map.height());
    let _ = writeln!(out, "width {}", map.width());
    let _ = writeln!(out, "map");
    for y in 0..map.height() {
        for x in 0..map.width() {
            out.push(if map.is_blocked(Cell::new(x, y)) { '@' } else { '.' });
        }
        out.push('\n');
    }
    out
}

/// Parse every entry of a scen v1 file without validating against a map.
pub fn parse_scen_entries(text: &str) -> Result<Vec<ScenarioEntry>, ParseError> {
    let mut lines = text.lines().map(|l| l.trim_end_matches('\r')).enumerate();
    match lines.next() {
        Some((_, "version 1")) => {}
        Some((i, other)) => {
            return Err(err(i + 1, format!("expected `version 1`, found `{other}`")))
        }
        None => return Err(err(1, "empty scenario file")),
    }
    let mut entries = Vec::new();
    for (i, line) in lines {
        let n = i + 1;
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 9 {
            return Err(err(
                n,
                format!("expected 9 tab-separated fields, found {}", fields.len()),
            ));
        }
        let parse_u32 = |idx: usize, name: &str| -> Result<u32, ParseError> {
            fields[idx]
                .parse()
                .map_err(|_| err(n, format!("bad {name} `{}`", fields[idx])))
        };
        entries.push(ScenarioEntry {
            bucket: parse_u32(0, "bucket")?,
            map_name: fields[1].to_string(),
            map_width: parse_u32(2, "width")?,
            map_height: parse_u32(3, "height")?,
            start: Cell::new(parse_u32(4, "start x")?, parse_u32(5, "start y")?),
            goal: Cell::new(parse_u32(6, "goal x")?, parse_u32(7, "goal y")?),
            optimal_length: fields[8]
                .parse()
                .map_err(|_| err(n, format!("bad optimal length `{}`", fields[8])))?,
        });
    }
    Ok(entries)
}

/// The first `n` scen entries as agent tasks with ids `0..n-1`, validated
/// against `map` (bounds, blocked cells, distinct starts and goals).
pub fn parse_scen(text: &str, n: usize, map: &GridMap) -> Result<Vec<AgentTask>, ParseError> {
    let entries = parse_scen_entries(text)?;
    if entries.len() < n {
        return Err(ParseError::NotEnoughEntries {
            wanted: n,
            got: entries.len(),
        });
    }
    let mut tasks = Vec::with_capacity(n);
    for (id, entry) in entries.iter().take(n).enumerate() {
        let line = id + 2; // one header line, entries are 1-per-line after it
        if entry.map_width != map.width() || entry.map_height != map.height() {
            return Err(ParseError::DimensionMismatch {
                line,
                scen_w: entry.map_width,
                scen_h: entry.map_height,
                map_w: map.width(),
                map_h: map.height(),
            });
        }
        for cell in [entry.start, entry.goal] {
            if cell.x >= entry.map_width || cell.y >= entry.map_height {
                return Err(ParseError::EntryOutOfBounds { line });
            }
            if map.is_blocked(cell) {
                return Err(ParseError::EntryBlocked { line });
            }
        }
        tasks.push(AgentTask {
            id,
            start: entry.start,
            goal: entry.goal,
        });
    }
    for i in 0..tasks.len() {
        for j in (i + 1)..tasks.len() {
            if tasks[i].start == tasks[j].start {
                return Err(ParseError::DuplicateStart(i, j));
            }
            if tasks[i].goal == tasks[j].goal {
                return Err(ParseError::DuplicateGoal(i, j));
            }
        }
    }
    Ok(tasks)
}

/// One benchmark episode, as written to the results CSV.
#[derive(Clone, Debug, PartialEq)]
pub struct RunRecord {
    pub grid_name: String,
    pub algorithm: String,
    pub policy: String,
    pub agent_count: usize,
    pub window: u32,
    pub horizon: u32,
    pub budget: u64,
    /// Scenario id for benchmark sweeps, or the seed for single solves.
    pub scen_id: u64,
    /// Capped at the instance's makespan cap when unsolved.
    pub makespan: u32,
    pub solved: bool,
    pub periods: u32,
    pub expansions_total: u64,
}

pub const RESULTS_HEADER: &str =
    "grid_name,algorithm,policy,agent_count,window,horizon,budget,scen_id,makespan,solved,periods,expansions_total";

fn record_row(r: &RunRecord) -> String {
    format!(
        "{},{},{},{},{},{},{},{},{},{},{},{}",
        r.grid_name,
        r.algorithm,
        r.policy,
        r.agent_count,
        r.window,
        r.horizon,
        r.budget,
        r.scen_id,
        r.makespan,
        r.solved,
        r.periods,
        r.expansions_total
    )
}

/// Results CSV: a header row plus one row per record, columns in
/// [`RunRecord`] field order, LF line endings.
pub fn write_results(records: &[RunRecord]) -> String {
    let mut out = String::from(RESULTS_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&record_row(r));
        out.push('\n');
    }
    out
}

/// Parse a results CSV produced by [`write_results`].
pub fn parse_results(text: &str) -> Result<Vec<RunRecord>, ParseError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header == RESULTS_HEADER => {}
        Some((i, other)) => return Err(err(i + 1, format!("unexpected header `{other}`"))),
        None => return Err(err(1, "empty results file")),
    }
    let mut records = Vec::new();
    for (i, line) in lines {
        let n = i + 1;
        if line.is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 12 {
            return Err(err(n, format!("expected 12 columns, found {}", f.len())));
        }
        let field = |idx: usize, name: &str| -> Result<u64, ParseError> {
            f[idx]
                .parse()
                .map_err(|_| err(n, format!("bad {name} `{}`", f[idx])))
        };
        records.push(RunRecord {
            grid_name: f[0].to_string(),
            algorithm: f[1].to_string(),
            policy: f[2].to_string(),
            agent_count: field(3, "agent_count")? as usize,
            window: field(4, "window")? as u32,
            horizon: field(5, "horizon")? as u32,
            budget: field(6, "budget")?,
            scen_id: field(7, "scen_id")?,
            makespan: field(8, "makespan")? as u32,
            solved: match f[9] {
                "true" => true,
                "false" => false,
                other => return Err(err(n, format!("bad solved flag `{other}`"))),
            },
            periods: field(10, "periods")? as u32,
            expansions_total: field(11, "expansions_total")?,
        });
    }
    Ok(records)
}

pub const CACTUS_HEADER: &str = "algorithm,policy,makespan,cumulative_solved";

/// Cactus-plot CSV: per (algorithm, policy), the sorted distinct makespans of
/// solved runs with the cumulative solved count at each. Unsolved runs are
/// excluded.
pub fn cactus_data(records: &[RunRecord]) -> String {
    let mut groups: std::collections::BTreeMap<(String, String), Vec<u32>> =
        std::collections::BTreeMap::new();
    for r in records.iter().filter(|r| r.solved) {
        groups
            .entry((r.algorithm.clone(), r.policy.clone()))
            .or_default()
            .push(r.makespan);
    }
    let mut out = String::from(CACTUS_HEADER);
    out.push('\n');
    for ((algo, policy), mut makespans) in groups {
        makespans.sort_unstable();
        let mut cumulative = 0usize;
        let mut idx = 0;
        while idx < makespans.len() {
            let value = makespans[idx];
            while idx < makespans.len() && makespans[idx] == value {
                cumulative += 1;
                idx += 1;
            }
            let _ = writeln!(out, "{algo},{policy},{value},{cumulative}");
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn record(algo: &str, policy: &str, makespan: u32, solved: bool) -> RunRecord {
        RunRecord {
            grid_name: "g".into(),
            algorithm: algo.into(),
            policy: policy.into(),
            agent_count: 2,
            window: 5,
            horizon: 10,
            budget: 30,
            scen_id: 1,
            makespan,
            solved,
            periods: 3,
            expansions_total: 12,
        }
    }

    #[test]
    fn parse_tiny_map() {
        let map = parse_map("type octile\nheight 1\nwidth 3\nmap\n.@.\n").unwrap();
        assert_eq!((map.width(), map.height()), (3, 1));
        assert!(!map.is_blocked(Cell::new(0, 0)));
        assert!(map.is_blocked(Cell::new(1, 0)));
        assert!(!map.is_blocked(Cell::new(2, 0)));
    }

    #[test]
    fn map_row_count_mismatch_is_error() {
        let e = parse_map("type octile\nheight 2\nwidth 3\nmap\n...\n").unwrap_err();
        assert!(matches!(e, ParseError::Malformed { .. }), "{e}");
        let e = parse_map("type octile\nheight 1\nwidth 3\nmap\n...\n...\n").unwrap_err();
        assert!(e.to_string().contains("line 6"), "{e}");
    }

    #[test]
    fn map_unknown_char_names_line() {
        let e = parse_map("type octile\nheight 2\nwidth 2\nmap\n..\n.X\n").unwrap_err();
        assert!(e.to_string().contains("line 6"), "{e}");
    }

    #[test]
    fn empty_32_32_benchmark_file() {
        let mut text = String::from("type octile\nheight 32\nwidth 32\nmap\n");
        for _ in 0..32 {
            text.push_str(&".".repeat(32));
            text.push('\n');
        }
        let map = parse_map(&text).unwrap();
        assert_eq!((map.width(), map.height()), (32, 32));
        assert_eq!(map.unblocked_cells().count(), 32 * 32);
    }

    #[test]
    fn grass_and_trees() {
        let map = parse_map("type octile\nheight 1\nwidth 4\nmap\nG.TW\n").unwrap();
        assert!(!map.is_blocked(Cell::new(0, 0)));
        assert!(map.is_blocked(Cell::new(2, 0)));
        assert!(map.is_blocked(Cell::new(3, 0)));
    }

    #[test]
    fn scen_zero_agents() {
        let map = GridMap::open(8, 8);
        assert_eq!(parse_scen("version 1\n", 0, &map).unwrap(), vec![]);
    }

    #[test]
    fn scen_too_few_entries() {
        let map = GridMap::open(8, 8);
        let text = "version 1\n0\tm\t8\t8\t0\t0\t1\t1\t2.0\n";
        assert_eq!(
            parse_scen(text, 2, &map).unwrap_err(),
            ParseError::NotEnoughEntries { wanted: 2, got: 1 }
        );
    }

    #[test]
    fn scen_two_handcrafted_lines() {
        let map = GridMap::open(8, 8);
        let text = "version 1\n\
                    0\tempty-8-8.map\t8\t8\t1\t2\t5\t6\t8.0\n\
                    0\tempty-8-8.map\t8\t8\t3\t0\t0\t7\t10.0\n";
        let tasks = parse_scen(text, 2, &map).unwrap();
        assert_eq!(tasks[0].start, Cell::new(1, 2)); // column 1, row 2
        assert_eq!(tasks[0].goal, Cell::new(5, 6));
        assert_eq!(tasks[1].id, 1);
        assert_eq!(tasks[1].start, Cell::new(3, 0));
        assert_eq!(tasks[1].goal, Cell::new(0, 7));
    }

    #[test]
    fn scen_blocked_start_is_error() {
        let map = parse_map("type octile\nheight 2\nwidth 2\nmap\n@.\n..\n").unwrap();
        let text = "version 1\n0\tm\t2\t2\t0\t0\t1\t1\t2.0\n";
        assert!(matches!(
            parse_scen(text, 1, &map).unwrap_err(),
            ParseError::EntryBlocked { line: 2 }
        ));
    }

    #[test]
    fn results_csv_single_record() {
        let csv = write_results(&[record("prp", "shared", 40, true)]);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[0], RESULTS_HEADER);
        assert_eq!(lines[1], "g,prp,shared,2,5,10,30,1,40,true,3,12");
    }

    #[test]
    fn cactus_two_solved_runs() {
        let csv = cactus_data(&[
            record("lns2", "cpb", 40, true),
            record("lns2", "cpb", 60, true),
        ]);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[1], "lns2,cpb,40,1");
        assert_eq!(lines[2], "lns2,cpb,60,2");
    }

    #[test]
    fn cactus_excludes_unsolved() {
        let csv = cactus_data(&[
            record("lns2", "cpb", 40, true),
            record("lns2", "cpb", 100, false),
        ]);
        assert_eq!(csv.lines().count(), 2);
    }

    #[test]
    fn results_roundtrip() {
        let records = vec![
            record("pibt", "none", 50, true),
            record("lns2", "fixed:50", 100, false),
        ];
        assert_eq!(parse_results(&write_results(&records)).unwrap(), records);
    }

    fn arb_map() -> impl Strategy<Value = GridMap> {
        (1u32..6, 1u32..6).prop_flat_map(|(w, h)| {
            proptest::collection::vec(proptest::bool::ANY, (w * h) as usize)
                .prop_map(move |blocked| GridMap::new(w, h, blocked).unwrap())
        })
    }

    proptest! {
        #[test]
        fn map_roundtrip(map in arb_map()) {
            prop_assert_eq!(parse_map(&write_map(&map)).unwrap(), map);
        }

        #[test]
        fn scen_prefix_property(n in 0usize..5) {
            let map = GridMap::open(16, 16);
            let mut text = String::from("version 1\n");
            for i in 0..6u32 {
                text.push_str(&format!("0\tm\t16\t16\t{i}\t0\t{i}\t15\t15.0\n"));
            }
            let shorter = parse_scen(&text, n, &map).unwrap();
            let longer = parse_scen(&text, n + 1, &map).unwrap();
            prop_assert_eq!(&longer[..n], &shorter[..]);
        }
    }
}
