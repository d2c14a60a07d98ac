use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, LogNormal, Normal, Poisson};
use serde_json::json;

use super::{RegionSpec, SynthConfig, SynthError};
use crate::corpus::{
    Authorship, Corpus, CorpusError, Institution, InstitutionKind, Journal, JournalId,
    NameNormalizer, Publication, Region, Researcher, YearWindow,
};
use crate::corpus::{
    INSTITUTIONS_FILE, MACRO_GROUPS_FILE, PUBLICATIONS_FILE, REGIONS_FILE, ROSTER_FILE,
};
use crate::geo::{great_circle_km, LatLon};


/// A generated corpus, the planted group-level drivers and the files it
/// serializes to.
#[derive(Debug, Clone)]
pub struct SynthCorpus {
    pub window: YearWindow,
    pub regions: Vec<Region>,
    /// `(region_code, group)` in preset order.
    pub macro_groups: Vec<(String, String)>,
    pub institutions: Vec<Institution>,
    pub researchers: Vec<Researcher>,
    /// Every journal generated; publications index into this list.
    pub journals: Vec<Journal>,
    pub publications: Vec<Publication>,
    pub planted: Vec<PlantedGroup>,
    header: Vec<String>,
}

/// Drivers of one (university, SDS) group's collaboration propensity.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantedGroup {
    pub university_id: String,
    pub sds_code: String,
    pub staff: f64,
    /// Distance under the expected regional demand of the SDS.
    pub d_expected: f64,
    /// SS per researcher relative to the SDS mean, before collaborations.
    pub quality: f64,
    pub frailty: f64,
}

fn allocate(total: usize, weights: &[f64]) -> Vec<usize> {
    // largest remainder
    let sum: f64 = weights.iter().sum();
    let exact: Vec<f64> = weights.iter().map(|w| w / sum * total as f64).collect();
    let mut out: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let mut rest: Vec<(usize, f64)> = exact
        .iter()
        .enumerate()
        .map(|(i, e)| (i, e - e.floor()))
        .collect();
    rest.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let short = total - out.iter().sum::<usize>();
    for (i, _) in rest.into_iter().take(short) {
        out[i] += 1;
    }
    out
}

fn jitter(rng: &mut ChaCha8Rng, region: &RegionSpec, max_km: f64) -> LatLon {
    let r = max_km * rng.random::<f64>().sqrt();
    let theta = rng.random::<f64>() * std::f64::consts::TAU;
    let lat = (region.lat + r * theta.cos() / 111.2).clamp(-90.0, 90.0);
    let lon = region.lon + r * theta.sin() / (111.2 * region.lat.to_radians().cos().max(0.1));
    LatLon::new(lat, lon.clamp(-180.0, 180.0)).expect("clamped")
}

fn pick_weighted(rng: &mut ChaCha8Rng, cumulative: &[f64]) -> usize {
    let total = *cumulative.last().expect("non-empty");
    let u = rng.random::<f64>() * total;
    cumulative.partition_point(|&c| c <= u).min(cumulative.len() - 1)
}

fn cumulative(weights: impl IntoIterator<Item = f64>) -> Vec<f64> {
    let mut acc = 0.0;
    weights
        .into_iter()
        .map(|w| {
            acc += w;
            acc
        })
        .collect()
}

struct Group {
    university: usize,
    sds: usize,
    members: Vec<usize>,
}

struct Person {
    id: String,
    name: String,
    university: usize,
    group: usize,
    years: Vec<i32>,
    log_quality: f64,
}

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

pub fn generate_corpus(cfg: &SynthConfig) -> Result<SynthCorpus, SynthError> {
    cfg.validate()?;
    let window = cfg.year_window()?;
    let years: Vec<i32> = (window.start..=window.end).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let normalizer = NameNormalizer::default();
    let std_normal = Normal::new(0.0, 1.0).expect("unit normal");

    let regions: Vec<Region> = cfg
        .regions
        .iter()
        .map(|r| {
            Ok(Region {
                code: r.code.clone(),
                capital_name: r.capital_name.clone(),
                capital_location: LatLon::new(r.lat, r.lon)
                    .map_err(|e| SynthError::Invalid(format!("region {}: {e}", r.code)))?,
            })
        })
        .collect::<Result<_, SynthError>>()?;

    // institutions
    let mut institutions = Vec::new();
    let mut uni_region = Vec::new();
    let uni_alloc = allocate(
        cfg.n_universities,
        &cfg.regions.iter().map(|r| r.universities).collect::<Vec<_>>(),
    );
    for (ri, &n) in uni_alloc.iter().enumerate() {
        let spec = &cfg.regions[ri];
        for k in 0..n {
            let id = format!("U{:03}", institutions.len() + 1);
            let name = if k == 0 {
                format!("Università di {}", spec.capital_name)
            } else {
                format!("Università di {} {}", spec.capital_name, k + 1)
            };
            institutions.push(Institution {
                canonical_name: normalizer.normalize(&name),
                id,
                name,
                kind: InstitutionKind::University,
                region_code: spec.code.clone(),
                location: jitter(&mut rng, spec, cfg.collaboration.jitter_km),
            });
            uni_region.push(ri);
        }
    }
    let n_uni = institutions.len();

    let demand_regions: Vec<usize> = (0..cfg.regions.len())
        .filter(|&i| cfg.regions[i].enterprises > 0.0)
        .collect();
    // one enterprise per demand region, the rest by demand share
    let extra = allocate(
        cfg.n_enterprises - demand_regions.len(),
        &demand_regions
            .iter()
            .map(|&i| cfg.regions[i].enterprises)
            .collect::<Vec<_>>(),
    );
    let mut enterprises_in: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (k, &ri) in demand_regions.iter().enumerate() {
        let spec = &cfg.regions[ri];
        for _ in 0..(1 + extra[k]) {
            let seq = institutions.len() - n_uni + 1;
            let name = format!("Enterprise {seq:03} {} S.p.A.", spec.capital_name);
            enterprises_in.entry(ri).or_default().push(institutions.len());
            institutions.push(Institution {
                canonical_name: normalizer.normalize(&name),
                id: format!("E{seq:03}"),
                name,
                kind: InstitutionKind::Enterprise,
                region_code: spec.code.clone(),
                location: jitter(&mut rng, spec, cfg.collaboration.jitter_km),
            });
        }
    }

    // staff
    let st = &cfg.staffing;
    let size: Vec<f64> = (0..n_uni)
        .map(|_| (st.university_sd * std_normal.sample(&mut rng)).exp())
        .collect();
    let uni_quality: Vec<f64> = (0..n_uni).map(|_| std_normal.sample(&mut rng)).collect();
    let log_var = st.university_sd.powi(2) + st.group_sd.powi(2);
    let mut groups: Vec<Group> = Vec::new();
    let mut people: Vec<Person> = Vec::new();
    for (si, sds) in cfg.sds.iter().enumerate() {
        let mu = (st.mean * sds.staff_scale).ln() - log_var / 2.0;
        for u in 0..n_uni {
            let p_present = (sds.presence * size[u]).min(1.0);
            if si > 0 || sds.presence < 1.0 {
                if rng.random::<f64>() >= p_present {
                    continue;
                }
            }
            let log_n = mu + size[u].ln() + st.group_sd * std_normal.sample(&mut rng);
            let n = (log_n.exp().round() as usize).clamp(1, st.max_group);
            let g = groups.len();
            let mut members = Vec::with_capacity(n);
            for _ in 0..n {
                let full = years.len() == 1 || rng.random::<f64>() < st.full_years_share;
                let active = if full {
                    years.clone()
                } else {
                    let a = rng.random_range(0..years.len());
                    let mut b = rng.random_range(0..years.len());
                    if a == b && years.len() > 1 {
                        b = (a + 1) % years.len();
                    }
                    let (lo, hi) = (a.min(b), a.max(b));
                    // strict sub-range
                    let hi = if lo == 0 && hi == years.len() - 1 { hi - 1 } else { hi };
                    years[lo..=hi].to_vec()
                };
                let rq = &cfg.research;
                let seq = people.len() + 1;
                members.push(people.len());
                people.push(Person {
                    id: format!("R{seq:05}"),
                    name: format!("Researcher {seq:05}"),
                    university: u,
                    group: g,
                    years: active,
                    log_quality: rq.university_quality_sd * uni_quality[u]
                        + rq.researcher_quality_sd * std_normal.sample(&mut rng),
                });
            }
            groups.push(Group {
                university: u,
                sds: si,
                members,
            });
        }
    }

    // journals: ascending distinct impact factors per category
    let rq = &cfg.research;
    let mut journals = Vec::new();
    let mut category_journals: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    let if_dist = LogNormal::<f64>::new(0.5, 0.8).expect("valid lognormal");
    for sds in &cfg.sds {
        if category_journals.contains_key(sds.category.as_str()) {
            continue;
        }
        let mut ifs: Vec<f64> = (0..rq.journals_per_category)
            .map(|_| (if_dist.sample(&mut rng) * 1000.0).round() / 1000.0)
            .collect();
        ifs.sort_by(f64::total_cmp);
        for i in 1..ifs.len() {
            if ifs[i] <= ifs[i - 1] {
                ifs[i] = ifs[i - 1] + 0.001;
                ifs[i] = (ifs[i] * 1000.0).round() / 1000.0;
            }
        }
        let ids = ifs
            .into_iter()
            .enumerate()
            .map(|(k, impact_factor)| {
                journals.push(Journal {
                    name: format!("{} Journal {:02}", sds.category, k + 1),
                    category: sds.category.clone(),
                    impact_factor,
                });
                journals.len() - 1
            })
            .collect();
        category_journals.insert(sds.category.as_str(), ids);
    }
    let n_j = rq.journals_per_category;
    // journal rank for an article by a researcher of the given log quality
    let pick_journal = |rng: &mut ChaCha8Rng, lq: f64| -> usize {
        let t = logistic(rq.prestige_slope * lq + rq.prestige_noise * std_normal.sample(rng));
        ((t * (n_j - 1) as f64).round() as usize).min(n_j - 1)
    };

    let mut publications: Vec<Publication> = Vec::new();
    let mut ss: Vec<f64> = vec![0.0; people.len()];
    let author = |p: &Person| Authorship {
        author_name: p.name.clone(),
        institution_id: institutions[p.university].id.clone(),
        researcher_id: Some(p.id.clone()),
    };

    // ordinary output
    for pi in 0..people.len() {
        let p = &people[pi];
        let rate = rq.pubs_per_year * (rq.rate_elasticity * p.log_quality).exp();
        let g = &groups[p.group];
        let category = cfg.sds[g.sds].category.as_str();
        for &year in &p.years {
            let n = Poisson::new(rate).expect("positive rate").sample(&mut rng) as usize;
            for _ in 0..n {
                let rank = pick_journal(&mut rng, p.log_quality);
                let mut byline_ids = vec![pi];
                let k = rng.random_range(0..=rq.max_coauthors);
                for _ in 0..k {
                    let c = *g.members.choose(&mut rng).expect("non-empty group");
                    if !byline_ids.contains(&c) {
                        byline_ids.push(c);
                    }
                }
                let weight = rank as f64 / (n_j - 1) as f64;
                for &b in &byline_ids {
                    ss[b] += weight;
                }
                publications.push(Publication {
                    id: format!("P{:06}", publications.len() + 1),
                    year,
                    journal: JournalId(category_journals[category][rank]),
                    byline: byline_ids.iter().map(|&b| author(&people[b])).collect(),
                });
            }
        }
    }

    // planted drivers per group
    let window_len = years.len() as f64;
    let staff: Vec<f64> = groups
        .iter()
        .map(|g| {
            g.members
                .iter()
                .map(|&m| people[m].years.len() as f64 / window_len)
                .sum()
        })
        .collect();
    let excell: Vec<f64> = groups
        .iter()
        .zip(&staff)
        .map(|(g, &m)| g.members.iter().map(|&i| ss[i]).sum::<f64>() / m)
        .collect();
    let cc = &cfg.collaboration;
    let frailty_dist = (cc.frailty_alpha > 0.0).then(|| {
        Gamma::new(1.0 / cc.frailty_alpha, cc.frailty_alpha).expect("positive frailty")
    });
    let demand_noise = Normal::new(0.0, cc.demand_sd.max(0.0)).expect("valid sd");

    let mut planted = Vec::with_capacity(groups.len());
    let mut group_weight = vec![0.0; groups.len()];
    let mut sds_demand: Vec<Vec<f64>> = Vec::with_capacity(cfg.sds.len());
    for si in 0..cfg.sds.len() {
        let w: Vec<f64> = demand_regions
            .iter()
            .map(|&ri| cfg.regions[ri].enterprises * demand_noise.sample(&mut rng).exp())
            .collect();
        let total: f64 = w.iter().sum();
        let w: Vec<f64> = w.into_iter().map(|x| x / total).collect();
        sds_demand.push(w);

        let members: Vec<usize> = (0..groups.len()).filter(|&g| groups[g].sds == si).collect();
        if members.is_empty() {
            continue;
        }
        let mean_excell = members.iter().map(|&g| excell[g]).sum::<f64>() / members.len() as f64;
        for &g in &members {
            let loc = institutions[groups[g].university].location;
            let d_expected: f64 = demand_regions
                .iter()
                .zip(&sds_demand[si])
                .map(|(&ri, w)| w * great_circle_km(loc, regions[ri].capital_location))
                .sum();
            let quality = if mean_excell > 0.0 { excell[g] / mean_excell } else { 0.0 };
            let frailty = frailty_dist.as_ref().map_or(1.0, |d| d.sample(&mut rng));
            group_weight[g] = (cc.b_m * staff[g] + cc.b_d * d_expected + cc.b_q * quality).exp()
                * frailty;
            planted.push(PlantedGroup {
                university_id: institutions[groups[g].university].id.clone(),
                sds_code: cfg.sds[si].code.clone(),
                staff: staff[g],
                d_expected,
                quality,
                frailty,
            });
        }
    }

    // collaborative output
    for (si, sds) in cfg.sds.iter().enumerate() {
        let members: Vec<usize> = (0..groups.len()).filter(|&g| groups[g].sds == si).collect();
        if members.is_empty() {
            continue;
        }
        let national_staff: f64 = members.iter().map(|&g| staff[g]).sum();
        let expected = sds.collab_rate * national_staff;
        let n = if expected > 0.0 {
            Poisson::new(expected).expect("positive").sample(&mut rng) as usize
        } else {
            0
        };
        let cum_groups = cumulative(members.iter().map(|&g| group_weight[g]));
        let cum_demand = cumulative(sds_demand[si].iter().copied());
        let category = sds.category.as_str();
        for _ in 0..n {
            let g = members[pick_weighted(&mut rng, &cum_groups)];
            let lead = *groups[g].members.choose(&mut rng).expect("non-empty group");
            let year = *people[lead].years.choose(&mut rng).expect("active year");
            let mut byline_ids = vec![lead];
            if rng.random::<f64>() < cc.colleague_share {
                let c = *groups[g].members.choose(&mut rng).expect("non-empty");
                if c != lead {
                    byline_ids.push(c);
                }
            }
            if members.len() > 1 && rng.random::<f64>() < cc.second_university_share {
                let other = *members.choose(&mut rng).expect("non-empty");
                if groups[other].university != groups[g].university {
                    byline_ids.push(*groups[other].members.choose(&mut rng).expect("non-empty"));
                }
            }
            let rank = pick_journal(&mut rng, people[lead].log_quality);
            let weight = rank as f64 / (n_j - 1) as f64;
            for &b in &byline_ids {
                ss[b] += weight;
            }
            let mut byline: Vec<Authorship> =
                byline_ids.iter().map(|&b| author(&people[b])).collect();
            let n_ent = if rng.random::<f64>() < cc.second_enterprise_share { 2 } else { 1 };
            let mut chosen = BTreeSet::new();
            for _ in 0..n_ent {
                let ri = demand_regions[pick_weighted(&mut rng, &cum_demand)];
                let e = *enterprises_in[&ri].choose(&mut rng).expect("enterprise in region");
                chosen.insert(e);
            }
            for e in chosen {
                byline.push(Authorship {
                    author_name: format!("Staff {}", institutions[e].id),
                    institution_id: institutions[e].id.clone(),
                    researcher_id: None,
                });
            }
            publications.push(Publication {
                id: format!("P{:06}", publications.len() + 1),
                year,
                journal: JournalId(category_journals[category][rank]),
                byline,
            });
        }
    }

    let researchers = people
        .iter()
        .map(|p| Researcher {
            id: p.id.clone(),
            university_id: institutions[p.university].id.clone(),
            sds_code: cfg.sds[groups[p.group].sds].code.clone(),
            active_years: p.years.iter().copied().collect(),
        })
        .collect();

    Ok(SynthCorpus {
        window,
        regions,
        macro_groups: cfg
            .regions
            .iter()
            .map(|r| (r.code.clone(), r.group.clone()))
            .collect(),
        institutions,
        researchers,
        journals,
        publications,
        planted,
        header: vec![
            format!("synthetic corpus: preset {}, seed {}", cfg.name, cfg.seed),
            format!("window {window}"),
        ],
    })
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

impl SynthCorpus {
    /// In-memory corpus equal to what loading the written files yields.
    pub fn corpus(&self) -> Result<Corpus, CorpusError> {
        let mut remap: BTreeMap<usize, usize> = BTreeMap::new();
        let mut journals = Vec::new();
        let publications = self
            .publications
            .iter()
            .map(|p| {
                let id = *remap.entry(p.journal.0).or_insert_with(|| {
                    journals.push(self.journals[p.journal.0].clone());
                    journals.len() - 1
                });
                Publication {
                    journal: JournalId(id),
                    ..p.clone()
                }
            })
            .collect();
        Corpus::from_parts(
            publications,
            self.institutions.clone(),
            self.researchers.clone(),
            self.regions.clone(),
            journals,
            self.window,
        )
    }

    fn comment(&self) -> String {
        let mut s = String::new();
        for l in &self.header {
            let _ = writeln!(s, "# {l}");
        }
        s
    }

    pub fn publications_jsonl(&self) -> String {
        let mut s = self.comment();
        for p in &self.publications {
            let j = &self.journals[p.journal.0];
            let byline: Vec<serde_json::Value> = p
                .byline
                .iter()
                .map(|a| match &a.researcher_id {
                    Some(r) => json!({"author": a.author_name, "institution_id": a.institution_id, "researcher_id": r}),
                    None => json!({"author": a.author_name, "institution_id": a.institution_id}),
                })
                .collect();
            let v = json!({
                "id": p.id,
                "year": p.year,
                "journal": {"name": j.name, "category": j.category, "impact_factor": j.impact_factor},
                "byline": byline,
            });
            s.push_str(&v.to_string());
            s.push('\n');
        }
        s
    }

    pub fn institutions_csv(&self) -> String {
        let mut s = self.comment();
        s.push_str("id,name,kind,region_code,lat,lon\n");
        for i in &self.institutions {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{}",
                i.id,
                csv_field(&i.name),
                i.kind,
                i.region_code,
                i.location.lat(),
                i.location.lon()
            );
        }
        s
    }

    pub fn roster_csv(&self) -> String {
        let mut s = self.comment();
        s.push_str("researcher_id,university_id,sds_code,years\n");
        for r in &self.researchers {
            let years: Vec<String> = r.active_years.iter().map(|y| y.to_string()).collect();
            let _ = writeln!(s, "{},{},{},{}", r.id, r.university_id, csv_field(&r.sds_code), years.join(";"));
        }
        s
    }

    pub fn regions_csv(&self) -> String {
        let mut s = self.comment();
        s.push_str("code,capital_name,lat,lon\n");
        for r in &self.regions {
            let _ = writeln!(
                s,
                "{},{},{},{}",
                r.code,
                csv_field(&r.capital_name),
                r.capital_location.lat(),
                r.capital_location.lon()
            );
        }
        s
    }

    pub fn macro_groups_csv(&self) -> String {
        let mut s = self.comment();
        s.push_str("region_code,group\n");
        for (code, group) in &self.macro_groups {
            let _ = writeln!(s, "{code},{}", csv_field(group));
        }
        s
    }

    /// Writes the four corpus files plus `macro_groups.csv` into `dir`,
    /// creating it if needed.
    pub fn write(&self, dir: &Path) -> Result<(), SynthError> {
        let err = |path: &Path, e: std::io::Error| SynthError::Write {
            path: path.display().to_string(),
            message: e.to_string(),
        };
        fs::create_dir_all(dir).map_err(|e| err(dir, e))?;
        for (name, body) in [
            (PUBLICATIONS_FILE, self.publications_jsonl()),
            (INSTITUTIONS_FILE, self.institutions_csv()),
            (ROSTER_FILE, self.roster_csv()),
            (REGIONS_FILE, self.regions_csv()),
            (MACRO_GROUPS_FILE, self.macro_groups_csv()),
        ] {
            let path = dir.join(name);
            fs::write(&path, body).map_err(|e| err(&path, e))?;
        }
        Ok(())
    }
}
