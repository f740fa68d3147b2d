//! Writes the synthetic three-state fixture set used by `exosir fit` tests.
//!
//! The outbreak is a daily chain-binomial process with imported and
//! event-linked arrivals, reported the way the public sources report it:
//! new local cases, new imports (one case-list row each), new recoveries and
//! deaths. Usage: `cargo run -p exosir-core --example make_fixtures [DIR]`.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use chrono::{Days, NaiveDate};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Poisson};

struct Outbreak {
    code: &'static str,
    name: &'static str,
    population: u64,
    beta_e: f64,
    gamma: f64,
    /// Expected imports per day before travel restrictions.
    imports_per_day: f64,
    /// Day range and mean daily count of cases linked to a gathering.
    event: Option<(u64, u64, f64)>,
}

const DAYS: u64 = 92;
/// Imports drop to a tenth from this day on.
const RESTRICTIONS: u64 = 24;

const STATES: [Outbreak; 3] = [
    Outbreak {
        code: "tn",
        name: "Tamil Nadu",
        population: 72_147_030,
        beta_e: 0.16,
        gamma: 0.07,
        imports_per_day: 9.0,
        event: Some((31, 45, 40.0)),
    },
    Outbreak {
        code: "rj",
        name: "Rajasthan",
        population: 68_548_437,
        beta_e: 0.14,
        gamma: 0.07,
        imports_per_day: 7.0,
        event: Some((33, 40, 15.0)),
    },
    Outbreak {
        code: "kl",
        name: "Kerala",
        population: 33_406_061,
        beta_e: 0.11,
        gamma: 0.08,
        imports_per_day: 10.0,
        event: None,
    },
];

#[derive(Default, Clone, Copy)]
struct Day {
    local: u64,
    imported: u64,
    event: u64,
    recovered: u64,
    deceased: u64,
}

fn poisson(rng: &mut ChaCha8Rng, mean: f64) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    Poisson::new(mean).unwrap().sample(rng) as u64
}

fn simulate(o: &Outbreak, rng: &mut ChaCha8Rng) -> Vec<Day> {
    let n = o.population as f64;
    let (mut s, mut active) = (o.population, 0u64);
    (0..DAYS)
        .map(|t| {
            let taper = if t < RESTRICTIONS { 1.0 } else { 0.1 };
            let imported = poisson(rng, o.imports_per_day * taper);
            let event = match o.event {
                Some((from, to, mean)) if (from..=to).contains(&t) => poisson(rng, mean),
                _ => 0,
            };
            let local = poisson(rng, o.beta_e * s as f64 * active as f64 / n);
            let removed = Binomial::new(active, o.gamma).unwrap().sample(rng);
            let deceased = Binomial::new(removed, 0.02).unwrap().sample(rng);
            let new = local + imported + event;
            s -= new;
            active = active + new - removed;
            Day {
                local,
                imported,
                event,
                recovered: removed - deceased,
                deceased,
            }
        })
        .collect()
}

fn main() -> std::io::Result<()> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "data/synthetic".into()));
    std::fs::create_dir_all(&dir)?;
    let start = NaiveDate::from_ymd_opt(2020, 3, 1).unwrap();
    let date = |t: u64| start + Days::new(t);
    let mut rng = ChaCha8Rng::seed_from_u64(2020);
    let series: Vec<Vec<Day>> = STATES.iter().map(|o| simulate(o, &mut rng)).collect();

    let mut daily = BufWriter::new(File::create(dir.join("states_daily.csv"))?);
    let codes: Vec<String> = STATES.iter().map(|o| o.code.to_uppercase()).collect();
    writeln!(daily, "Date,Date_YMD,Status,TT,{}", codes.join(","))?;
    for t in 0..DAYS {
        for status in ["Confirmed", "Recovered", "Deceased"] {
            let values: Vec<u64> = series
                .iter()
                .map(|s| match status {
                    "Confirmed" => s[t as usize].local,
                    "Recovered" => s[t as usize].recovered,
                    _ => s[t as usize].deceased,
                })
                .collect();
            let total: u64 = values.iter().sum();
            let cells: Vec<String> = values.iter().map(u64::to_string).collect();
            writeln!(
                daily,
                "{},{},{status},{total},{}",
                date(t).format("%d-%b-%y"),
                date(t).format("%Y-%m-%d"),
                cells.join(",")
            )?;
        }
    }

    // case list: every import, roughly one local case in fifty, and a few
    // rows without an announcement date
    let mut raw = BufWriter::new(File::create(dir.join("raw_data.csv"))?);
    writeln!(
        raw,
        "Patient Number,Date Announced,Age Bracket,Gender,Detected State,State code,Current Status,Type of transmission"
    )?;
    let mut patient = 0;
    for t in 0..DAYS {
        for (o, s) in STATES.iter().zip(&series) {
            let d = s[t as usize];
            let locals = (0..d.local).filter(|_| rng.gen_bool(0.02)).count();
            let rows = std::iter::repeat_n("Imported", d.imported as usize)
                .chain(std::iter::repeat_n("Local", locals));
            for kind in rows {
                patient += 1;
                let kind = if kind == "Local" && rng.gen_bool(0.3) { "TBD" } else { kind };
                let age = rng.gen_range(5..85);
                let gender = if rng.gen_bool(0.5) { "M" } else { "F" };
                writeln!(
                    raw,
                    "{patient},{},{age},{gender},{},{},Hospitalized,{kind}",
                    date(t).format("%d/%m/%Y"),
                    o.name,
                    o.code.to_uppercase()
                )?;
            }
            if t % 30 == 7 {
                patient += 1;
                writeln!(raw, "{patient},,,,{},{},,", o.name, o.code.to_uppercase())?;
            }
        }
    }

    for (o, s) in STATES.iter().zip(&series) {
        let mut events = BufWriter::new(File::create(dir.join(format!("events_{}.csv", o.code)))?);
        writeln!(events, "date,count")?;
        for (t, d) in s.iter().enumerate() {
            if d.event > 0 {
                writeln!(events, "{},{}", date(t as u64).format("%Y-%m-%d"), d.event)?;
            }
        }
    }

    let mut pop = BufWriter::new(File::create(dir.join("population.toml"))?);
    writeln!(pop, "# Census of India 2011 totals, used as the population prone to infection")?;
    for o in &STATES {
        writeln!(pop, "{} = {}", o.code, o.population)?;
    }
    Ok(())
}
