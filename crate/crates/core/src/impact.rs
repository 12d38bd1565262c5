//! Pre/post withholding impact analysis: window construction, per-interval
//! metrics, cohort survival across windows, Wilcoxon testing of paired
//! differences, matched-control sampling, and relative follower growth.

use std::collections::BTreeMap;

use chrono::{Duration, NaiveDate};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::ingest::{build_daily_series, DailySeries};
use crate::records::{AccountTimeline, WithholdingEvent};
use crate::stats::{median, wilcoxon_signed_rank, StatsError};

/// Window sizes evaluated in days.
pub const DEFAULT_WINDOWS: [u32; 7] = [30, 45, 60, 75, 90, 120, 150];

/// Follower-count band for control matching.
pub const DEFAULT_MATCH_BAND: f64 = 0.10;

/// Averaging span for relative follower growth.
pub const DEFAULT_GROWTH_HORIZON: u32 = 90;

#[derive(Debug, Error)]
pub enum ImpactError {
    #[error("window must be at least one day")]
    BadWindow,
    #[error("windows must be sorted ascending and non-empty")]
    BadWindowList,
    #[error("date range does not overlap the account's series")]
    RangeOutsideSeries,
    #[error("no account survives the first-window cohort rule")]
    CohortEmpty,
    #[error("series does not cover at least one day on each side of the event")]
    InsufficientSpan,
    #[error(transparent)]
    Stats(#[from] StatsError),
}

/// Inclusive date range.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DateRange {
    pub start: NaiveDate,
    pub end: NaiveDate,
}

impl DateRange {
    pub fn days(&self) -> i64 {
        (self.end - self.start).num_days() + 1
    }

    pub fn iter(&self) -> impl Iterator<Item = NaiveDate> {
        let start = self.start;
        (0..self.days()).map(move |i| start + Duration::days(i))
    }
}

/// Builds the pre interval `[t - W, t - 1]` (W days) and the post interval
/// `[t, t + W]` (W + 1 days) around an event day.
pub fn make_intervals(event_day: NaiveDate, window: u32) -> (DateRange, DateRange) {
    let w = window as i64;
    let pre = DateRange {
        start: event_day - Duration::days(w),
        end: event_day - Duration::days(1),
    };
    let post = DateRange {
        start: event_day,
        end: event_day + Duration::days(w),
    };
    (pre, post)
}

/// The four per-interval metrics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Metric {
    MedRetweets,
    MedLikes,
    PostsPerDay,
    AvgFollowerGain,
}

impl Metric {
    pub const ALL: [Metric; 4] = [
        Metric::MedRetweets,
        Metric::MedLikes,
        Metric::PostsPerDay,
        Metric::AvgFollowerGain,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Metric::MedRetweets => "med_retweets",
            Metric::MedLikes => "med_likes",
            Metric::PostsPerDay => "posts_per_day",
            Metric::AvgFollowerGain => "avg_follower_gain",
        }
    }
}

/// Per-account metric values over one interval.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalMetrics {
    pub account_id: u64,
    pub med_retweets: f64,
    pub med_likes: f64,
    pub posts_per_day: f64,
    pub avg_follower_gain: f64,
    pub tweet_count_in_interval: u64,
}

impl IntervalMetrics {
    pub fn get(&self, metric: Metric) -> f64 {
        match metric {
            Metric::MedRetweets => self.med_retweets,
            Metric::MedLikes => self.med_likes,
            Metric::PostsPerDay => self.posts_per_day,
            Metric::AvgFollowerGain => self.avg_follower_gain,
        }
    }
}

/// Indexed view over a contiguous daily series.
pub struct SeriesView<'a> {
    rows: &'a [DailySeries],
    first: NaiveDate,
    last: NaiveDate,
}

impl<'a> SeriesView<'a> {
    pub fn new(rows: &'a [DailySeries]) -> Self {
        assert!(!rows.is_empty(), "daily series must be non-empty");
        Self {
            rows,
            first: rows[0].day,
            last: rows[rows.len() - 1].day,
        }
    }

    fn row(&self, day: NaiveDate) -> Option<&DailySeries> {
        if day < self.first || day > self.last {
            return None;
        }
        let idx = (day - self.first).num_days() as usize;
        Some(&self.rows[idx])
    }

    /// End-of-day follower count, clamping to the first/last observation
    /// outside the observed span.
    pub fn follower_end_of_day(&self, day: NaiveDate) -> u64 {
        if day < self.first {
            self.rows[0].follower_count_end_of_day
        } else if day > self.last {
            self.rows[self.rows.len() - 1].follower_count_end_of_day
        } else {
            self.row(day).unwrap().follower_count_end_of_day
        }
    }
}

/// Aggregates the four metrics over `range`. Days inside the range but
/// outside the observed series contribute zero activity; follower gain uses
/// end-of-day differencing across the range boundaries.
pub fn interval_metrics(
    series: &[DailySeries],
    range: DateRange,
) -> Result<IntervalMetrics, ImpactError> {
    let view = SeriesView::new(series);
    if range.end < view.first || range.start > view.last {
        return Err(ImpactError::RangeOutsideSeries);
    }
    let mut daily_retweets = Vec::with_capacity(range.days() as usize);
    let mut daily_likes = Vec::with_capacity(range.days() as usize);
    let mut tweet_count = 0u64;
    for day in range.iter() {
        match view.row(day) {
            Some(row) => {
                daily_retweets.push(row.retweets_received_total as f64);
                daily_likes.push(row.likes_received_total as f64);
                tweet_count += row.tweets_posted;
            }
            None => {
                daily_retweets.push(0.0);
                daily_likes.push(0.0);
            }
        }
    }
    let days = range.days() as f64;
    let gain = view.follower_end_of_day(range.end) as f64
        - view.follower_end_of_day(range.start - Duration::days(1)) as f64;
    Ok(IntervalMetrics {
        account_id: series[0].account_id,
        med_retweets: median(&daily_retweets),
        med_likes: median(&daily_likes),
        posts_per_day: tweet_count as f64 / days,
        avg_follower_gain: gain / days,
        tweet_count_in_interval: tweet_count,
    })
}

/// One paired difference: an account's metric in the post interval minus the
/// pre interval, for one window.
#[derive(Debug, Clone, PartialEq)]
pub struct ImpactRow {
    pub account_id: u64,
    pub window: u32,
    pub metric: Metric,
    pub pre_value: f64,
    pub post_value: f64,
    pub diff: f64,
}

/// Wilcoxon summary for one (window, metric) cell.
#[derive(Debug, Clone, PartialEq)]
pub struct ImpactTest {
    pub window: u32,
    pub metric: Metric,
    pub n: usize,
    pub pre_median: f64,
    pub post_median: f64,
    pub p_value: f64,
    pub significant: bool,
}

#[derive(Debug, Default)]
pub struct ImpactReport {
    /// Accounts surviving the first-window rule, ascending.
    pub cohort: Vec<u64>,
    pub rows: Vec<ImpactRow>,
    pub tests: Vec<ImpactTest>,
}

/// Runs the windowed pre/post analysis.
///
/// The first (smallest) window defines the cohort: accounts with at least
/// two tweets in both intervals. Exactly that cohort is reused for every
/// later window. Each (window, metric) cell reports the Wilcoxon two-sided
/// p over the paired differences, ordered by account id.
pub fn run_impact_analysis(
    events: &BTreeMap<u64, WithholdingEvent>,
    timelines: &BTreeMap<u64, AccountTimeline>,
    windows: &[u32],
) -> Result<ImpactReport, ImpactError> {
    if windows.is_empty() || windows.windows(2).any(|w| w[0] >= w[1]) {
        return Err(ImpactError::BadWindowList);
    }
    if windows[0] == 0 {
        return Err(ImpactError::BadWindow);
    }

    let mut series_by_account: BTreeMap<u64, Vec<DailySeries>> = BTreeMap::new();
    for (&account_id, event) in events {
        let Some(timeline) = timelines.get(&account_id) else {
            continue;
        };
        debug_assert_eq!(event.account_id, account_id);
        if let Ok(series) = build_daily_series(timeline) {
            series_by_account.insert(account_id, series);
        }
    }

    // Cohort rule on the first window.
    let first_window = windows[0];
    let mut cohort = Vec::new();
    for (&account_id, series) in &series_by_account {
        let t = events[&account_id].event_day;
        let (pre, post) = make_intervals(t, first_window);
        let ok = |range: DateRange| {
            interval_metrics(series, range)
                .map(|m| m.tweet_count_in_interval >= 2)
                .unwrap_or(false)
        };
        if ok(pre) && ok(post) {
            cohort.push(account_id);
        }
    }
    if cohort.is_empty() {
        return Err(ImpactError::CohortEmpty);
    }

    let mut report = ImpactReport {
        cohort: cohort.clone(),
        ..Default::default()
    };
    for &window in windows {
        let mut per_metric: BTreeMap<Metric, Vec<(f64, f64)>> = BTreeMap::new();
        for &account_id in &cohort {
            let series = &series_by_account[&account_id];
            let t = events[&account_id].event_day;
            let (pre, post) = make_intervals(t, window);
            let pre_m = interval_metrics(series, pre)?;
            let post_m = interval_metrics(series, post)?;
            for metric in Metric::ALL {
                let (a, b) = (pre_m.get(metric), post_m.get(metric));
                per_metric.entry(metric).or_default().push((a, b));
                report.rows.push(ImpactRow {
                    account_id,
                    window,
                    metric,
                    pre_value: a,
                    post_value: b,
                    diff: b - a,
                });
            }
        }
        for metric in Metric::ALL {
            let pairs = &per_metric[&metric];
            let diffs: Vec<f64> = pairs.iter().map(|(a, b)| b - a).collect();
            let result = wilcoxon_signed_rank(&diffs)?;
            report.tests.push(ImpactTest {
                window,
                metric,
                n: pairs.len(),
                pre_median: median(&pairs.iter().map(|(a, _)| *a).collect::<Vec<_>>()),
                post_median: median(&pairs.iter().map(|(_, b)| *b).collect::<Vec<_>>()),
                p_value: result.p_two_sided,
                significant: result.p_two_sided < 0.05,
            });
        }
    }
    Ok(report)
}

/// A matched control with its synthetic event day.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ControlMatch {
    pub withheld_account_id: u64,
    pub control_account_id: u64,
    pub synthetic_event_day: NaiveDate,
}

#[derive(Debug, Default)]
pub struct MatchOutcome {
    pub matches: Vec<ControlMatch>,
    /// Withheld accounts with no in-band candidate left.
    pub unmatched: Vec<u64>,
}

fn mean_follower_count(timeline: &AccountTimeline) -> f64 {
    let sum: u64 = timeline.tweets.iter().map(|t| t.follower_count_at_post).sum();
    sum as f64 / timeline.len() as f64
}

/// Calendar midpoint of an account's activity span.
pub fn activity_midpoint(timeline: &AccountTimeline) -> NaiveDate {
    let first = timeline.first_day();
    let last = timeline.last_day();
    first + Duration::days((last - first).num_days() / 2)
}

/// Samples one never-withheld control per withheld account, uniformly among
/// candidates whose mean follower count lies within `band` of the withheld
/// account's, without replacement. The synthetic event day is the midpoint
/// of the control's activity span. Deterministic for a fixed seed.
pub fn match_controls(
    withheld_cohort: &[u64],
    candidate_pool: &[u64],
    timelines: &BTreeMap<u64, AccountTimeline>,
    band: f64,
    seed: u64,
) -> MatchOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut available: Vec<u64> = candidate_pool.to_vec();
    available.sort_unstable();
    let mut outcome = MatchOutcome::default();
    let mut sorted_cohort: Vec<u64> = withheld_cohort.to_vec();
    sorted_cohort.sort_unstable();
    for &withheld_id in &sorted_cohort {
        let Some(withheld_tl) = timelines.get(&withheld_id) else {
            outcome.unmatched.push(withheld_id);
            continue;
        };
        let target = mean_follower_count(withheld_tl);
        let eligible: Vec<usize> = available
            .iter()
            .enumerate()
            .filter(|(_, &cid)| {
                timelines
                    .get(&cid)
                    .map(|tl| {
                        let m = mean_follower_count(tl);
                        if target == 0.0 {
                            m == 0.0
                        } else {
                            (m / target - 1.0).abs() <= band
                        }
                    })
                    .unwrap_or(false)
            })
            .map(|(i, _)| i)
            .collect();
        if eligible.is_empty() {
            outcome.unmatched.push(withheld_id);
            continue;
        }
        let pick = eligible[rng.gen_range(0..eligible.len())];
        let control_id = available.remove(pick);
        let control_tl = &timelines[&control_id];
        outcome.matches.push(ControlMatch {
            withheld_account_id: withheld_id,
            control_account_id: control_id,
            synthetic_event_day: activity_midpoint(control_tl),
        });
    }
    outcome
}

/// Relative daily follower growth before and after an event: average daily
/// gain over the horizon divided by the follower count at the window start.
/// `None` when the reference follower count is zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrowthRates {
    pub pre_rate: Option<f64>,
    pub post_rate: Option<f64>,
    pub followers_at_event: u64,
}

pub fn relative_growth(
    series: &[DailySeries],
    event_day: NaiveDate,
    horizon: u32,
) -> Result<GrowthRates, ImpactError> {
    let view = SeriesView::new(series);
    if view.first >= event_day || view.last < event_day {
        return Err(ImpactError::InsufficientSpan);
    }
    let (pre, post) = make_intervals(event_day, horizon);

    let pre_gain = (view.follower_end_of_day(pre.end) as f64
        - view.follower_end_of_day(pre.start - Duration::days(1)) as f64)
        / pre.days() as f64;
    let pre_base = view.follower_end_of_day(pre.start);
    let post_gain = (view.follower_end_of_day(post.end) as f64
        - view.follower_end_of_day(post.start - Duration::days(1)) as f64)
        / post.days() as f64;
    let post_base = view.follower_end_of_day(event_day);

    let rate = |gain: f64, base: u64| {
        if base == 0 {
            None
        } else {
            Some(gain / base as f64)
        }
    };
    Ok(GrowthRates {
        pre_rate: rate(pre_gain, pre_base),
        post_rate: rate(post_gain, post_base),
        followers_at_event: view.follower_end_of_day(event_day),
    })
}
