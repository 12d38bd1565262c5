//! Archive ingestion: JSONL parsing, timeline grouping, withholding-event
//! inference, daily per-account series, classification-cohort construction,
//! and the on-disk store (`timelines.bin` + `manifest.txt`).

use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use chrono::{DateTime, Duration, NaiveDate, Utc};
use thiserror::Error;

use crate::records::{
    validate_timeline, validate_tweet_record, AccountProfile, AccountTimeline, RawTweet,
    TweetRecord, WithholdingEvent,
};

const STORE_MAGIC: &[u8; 8] = b"TWSTOR1\0";
const STORE_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("file not found: {0}")]
    FileNotFound(String),
    #[error("more than half of the input lines are malformed ({malformed}/{total})")]
    CorruptInput { malformed: usize, total: usize },
    #[error("empty timeline for account {0}")]
    EmptyTimeline(u64),
    #[error("store i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("corrupt store: {0}")]
    CorruptStore(String),
    #[error("unsupported store version {0}")]
    StoreVersion(u32),
}

/// Result of parsing one JSONL archive.
#[derive(Debug, Default)]
pub struct ParseOutcome {
    pub records: Vec<TweetRecord>,
    /// Lines that failed JSON parsing or record validation.
    pub skipped: usize,
    /// Records that had at least one optional count defaulted to zero.
    pub defaulted: usize,
}

/// Parses a JSONL archive (one object per line, UTF-8) into validated
/// records. Malformed lines are counted and skipped; if more than half of
/// the non-empty lines are malformed the whole input is rejected.
pub fn parse_jsonl(path: &Path) -> Result<ParseOutcome, IngestError> {
    let file = File::open(path)
        .map_err(|_| IngestError::FileNotFound(path.display().to_string()))?;
    let reader = BufReader::new(file);
    let mut outcome = ParseOutcome::default();
    let mut total = 0usize;
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        total += 1;
        let parsed: Result<RawTweet, _> = serde_json::from_str(&line);
        match parsed.ok().map(validate_tweet_record) {
            Some(Ok(validated)) => {
                if validated.defaulted {
                    outcome.defaulted += 1;
                }
                outcome.records.push(validated.record);
            }
            _ => outcome.skipped += 1,
        }
    }
    if total > 0 && outcome.skipped * 2 > total {
        return Err(IngestError::CorruptInput {
            malformed: outcome.skipped,
            total,
        });
    }
    Ok(outcome)
}

/// Groups records into per-account timelines. Duplicate tweet ids are
/// dropped (archive replays); output is keyed and ordered by account id, so
/// the result does not depend on input order.
pub fn build_timelines(records: Vec<TweetRecord>) -> (BTreeMap<u64, AccountTimeline>, usize) {
    let mut seen: HashSet<u64> = HashSet::new();
    let mut duplicates = 0usize;
    let mut grouped: BTreeMap<u64, Vec<TweetRecord>> = BTreeMap::new();
    for record in records {
        if !seen.insert(record.tweet_id) {
            duplicates += 1;
            continue;
        }
        grouped.entry(record.account_id).or_default().push(record);
    }
    let timelines = grouped
        .into_iter()
        .map(|(id, tweets)| {
            let timeline = validate_timeline(tweets).expect("grouped tweets share account id");
            (id, timeline)
        })
        .collect();
    (timelines, duplicates)
}

/// Finds the proxy withholding event: the earliest tweet that starts an
/// unbroken withheld run reaching the end of the timeline. Returns `None`
/// when the last tweet is not withheld.
pub fn infer_withholding_event(timeline: &AccountTimeline) -> Option<WithholdingEvent> {
    let last = timeline.tweets.last()?;
    if !last.is_withheld() {
        return None;
    }
    let start = timeline
        .tweets
        .iter()
        .rposition(|t| !t.is_withheld())
        .map(|i| i + 1)
        .unwrap_or(0);
    Some(WithholdingEvent {
        account_id: timeline.account_id,
        event_day: timeline.tweets[start].day(),
    })
}

/// One day of an account's activity with end-of-day counter snapshots.
#[derive(Debug, Clone, PartialEq)]
pub struct DailySeries {
    pub account_id: u64,
    pub day: NaiveDate,
    pub tweets_posted: u64,
    pub retweets_received_total: u64,
    pub likes_received_total: u64,
    pub follower_count_end_of_day: u64,
    pub statuses_count_end_of_day: u64,
}

/// Expands a timeline into one row per calendar day between the first and
/// last tweet. Gap days carry the last observed follower/status counts
/// forward with zero activity.
pub fn build_daily_series(timeline: &AccountTimeline) -> Result<Vec<DailySeries>, IngestError> {
    if timeline.is_empty() {
        return Err(IngestError::EmptyTimeline(timeline.account_id));
    }
    let first = timeline.first_day();
    let last = timeline.last_day();
    let n_days = (last - first).num_days() as usize + 1;
    let mut rows = Vec::with_capacity(n_days);
    let mut tweet_iter = timeline.tweets.iter().peekable();
    let mut follower = timeline.tweets[0].follower_count_at_post;
    let mut statuses = timeline.tweets[0].statuses_count_at_post;
    for offset in 0..n_days {
        let day = first + Duration::days(offset as i64);
        let mut row = DailySeries {
            account_id: timeline.account_id,
            day,
            tweets_posted: 0,
            retweets_received_total: 0,
            likes_received_total: 0,
            follower_count_end_of_day: follower,
            statuses_count_end_of_day: statuses,
        };
        while let Some(tweet) = tweet_iter.peek() {
            if tweet.day() != day {
                break;
            }
            let tweet = tweet_iter.next().unwrap();
            row.tweets_posted += 1;
            row.retweets_received_total += tweet.retweet_count;
            row.likes_received_total += tweet.like_count;
            follower = tweet.follower_count_at_post;
            statuses = tweet.statuses_count_at_post;
        }
        row.follower_count_end_of_day = follower;
        row.statuses_count_end_of_day = statuses;
        rows.push(row);
    }
    Ok(rows)
}

/// Account id plus its withheld/not-withheld label.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CohortLabelRecord {
    pub account_id: u64,
    pub label: u8,
}

/// Builds the classification cohort: positives are accounts with a
/// withholding event; candidate negatives are accounts without one that
/// retweeted at least one withheld account and posted at least
/// `min_own_tweets` tweets of their own.
pub fn build_classification_cohort(
    timelines: &BTreeMap<u64, AccountTimeline>,
    events: &BTreeMap<u64, WithholdingEvent>,
    min_own_tweets: usize,
) -> Vec<CohortLabelRecord> {
    let mut cohort = Vec::new();
    for (&account_id, timeline) in timelines {
        if events.contains_key(&account_id) {
            cohort.push(CohortLabelRecord { account_id, label: 1 });
            continue;
        }
        let retweeted_withheld = timeline.tweets.iter().any(|t| {
            t.is_retweet
                && t.retweeted_account_id
                    .map(|src| events.contains_key(&src))
                    .unwrap_or(false)
        });
        let own_tweets = timeline.tweets.iter().filter(|t| !t.is_retweet).count();
        if retweeted_withheld && own_tweets >= min_own_tweets {
            cohort.push(CohortLabelRecord { account_id, label: 0 });
        }
    }
    cohort
}

/// Infers events for every timeline in the store.
pub fn infer_all_events(
    timelines: &BTreeMap<u64, AccountTimeline>,
) -> BTreeMap<u64, WithholdingEvent> {
    timelines
        .iter()
        .filter_map(|(&id, timeline)| infer_withholding_event(timeline).map(|e| (id, e)))
        .collect()
}

/// In-memory view of an ingested store: timelines plus (possibly defaulted)
/// profiles.
#[derive(Debug, Default)]
pub struct Store {
    pub timelines: BTreeMap<u64, AccountTimeline>,
    pub profiles: BTreeMap<u64, AccountProfile>,
}

impl Store {
    /// Profile for an account, synthesizing a minimal one when the archive
    /// did not carry profile fields.
    pub fn profile_or_default(&self, account_id: u64) -> AccountProfile {
        self.profiles.get(&account_id).cloned().unwrap_or(AccountProfile {
            account_id,
            screen_name: format!("user{account_id}"),
            display_name: String::new(),
            description: String::new(),
        })
    }
}

fn write_string<W: Write>(w: &mut W, s: &str) -> std::io::Result<()> {
    w.write_u32::<LittleEndian>(s.len() as u32)?;
    w.write_all(s.as_bytes())
}

fn read_string<R: Read>(r: &mut R) -> Result<String, IngestError> {
    let len = r.read_u32::<LittleEndian>()? as usize;
    let mut buf = vec![0u8; len];
    r.read_exact(&mut buf)?;
    String::from_utf8(buf).map_err(|_| IngestError::CorruptStore("invalid utf-8".into()))
}

/// Writes `timelines.bin` under `dir`.
pub fn write_store(dir: &Path, store: &Store) -> Result<(), IngestError> {
    std::fs::create_dir_all(dir)?;
    let mut w = BufWriter::new(File::create(dir.join("timelines.bin"))?);
    w.write_all(STORE_MAGIC)?;
    w.write_u32::<LittleEndian>(STORE_VERSION)?;
    w.write_u64::<LittleEndian>(store.timelines.len() as u64)?;
    for (&account_id, timeline) in &store.timelines {
        w.write_u64::<LittleEndian>(account_id)?;
        let profile = store.profile_or_default(account_id);
        write_string(&mut w, &profile.screen_name)?;
        write_string(&mut w, &profile.display_name)?;
        write_string(&mut w, &profile.description)?;
        w.write_u32::<LittleEndian>(timeline.len() as u32)?;
        for t in &timeline.tweets {
            w.write_u64::<LittleEndian>(t.tweet_id)?;
            w.write_i64::<LittleEndian>(t.created_at.timestamp())?;
            write_string(&mut w, &t.text)?;
            w.write_u64::<LittleEndian>(t.retweet_count)?;
            w.write_u64::<LittleEndian>(t.like_count)?;
            w.write_u64::<LittleEndian>(t.follower_count_at_post)?;
            w.write_u64::<LittleEndian>(t.friend_count_at_post)?;
            w.write_u64::<LittleEndian>(t.statuses_count_at_post)?;
            w.write_u8(t.is_retweet as u8)?;
            match t.retweeted_account_id {
                Some(src) => {
                    w.write_u8(1)?;
                    w.write_u64::<LittleEndian>(src)?;
                }
                None => w.write_u8(0)?,
            }
            w.write_u16::<LittleEndian>(t.withheld_in.len() as u16)?;
            for country in &t.withheld_in {
                write_string(&mut w, country)?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads `timelines.bin` from `dir`.
pub fn read_store(dir: &Path) -> Result<Store, IngestError> {
    let path = dir.join("timelines.bin");
    let file = File::open(&path)
        .map_err(|_| IngestError::FileNotFound(path.display().to_string()))?;
    let mut r = BufReader::new(file);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != STORE_MAGIC {
        return Err(IngestError::CorruptStore("bad magic".into()));
    }
    let version = r.read_u32::<LittleEndian>()?;
    if version != STORE_VERSION {
        return Err(IngestError::StoreVersion(version));
    }
    let n_accounts = r.read_u64::<LittleEndian>()?;
    let mut store = Store::default();
    for _ in 0..n_accounts {
        let account_id = r.read_u64::<LittleEndian>()?;
        let profile = AccountProfile {
            account_id,
            screen_name: read_string(&mut r)?,
            display_name: read_string(&mut r)?,
            description: read_string(&mut r)?,
        };
        let n_tweets = r.read_u32::<LittleEndian>()?;
        let mut tweets = Vec::with_capacity(n_tweets as usize);
        for _ in 0..n_tweets {
            let tweet_id = r.read_u64::<LittleEndian>()?;
            let ts = r.read_i64::<LittleEndian>()?;
            let created_at = DateTime::<Utc>::from_timestamp(ts, 0)
                .ok_or_else(|| IngestError::CorruptStore("timestamp out of range".into()))?;
            let text = read_string(&mut r)?;
            let retweet_count = r.read_u64::<LittleEndian>()?;
            let like_count = r.read_u64::<LittleEndian>()?;
            let follower_count_at_post = r.read_u64::<LittleEndian>()?;
            let friend_count_at_post = r.read_u64::<LittleEndian>()?;
            let statuses_count_at_post = r.read_u64::<LittleEndian>()?;
            let is_retweet = r.read_u8()? != 0;
            let retweeted_account_id = match r.read_u8()? {
                0 => None,
                _ => Some(r.read_u64::<LittleEndian>()?),
            };
            let n_withheld = r.read_u16::<LittleEndian>()?;
            let mut withheld_in = Vec::with_capacity(n_withheld as usize);
            for _ in 0..n_withheld {
                withheld_in.push(read_string(&mut r)?);
            }
            tweets.push(TweetRecord {
                tweet_id,
                account_id,
                created_at,
                text,
                retweet_count,
                like_count,
                follower_count_at_post,
                friend_count_at_post,
                statuses_count_at_post,
                withheld_in,
                is_retweet,
                retweeted_account_id,
            });
        }
        let timeline = validate_timeline(tweets)
            .map_err(|e| IngestError::CorruptStore(e.to_string()))?;
        store.timelines.insert(account_id, timeline);
        store.profiles.insert(account_id, profile);
    }
    Ok(store)
}

/// Writes `manifest.txt` with ingest counters.
pub fn write_manifest(dir: &Path, entries: &[(&str, u64)]) -> Result<(), IngestError> {
    let mut w = BufWriter::new(File::create(dir.join("manifest.txt"))?);
    for (key, value) in entries {
        writeln!(w, "{key}={value}")?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::TimeZone;
    use proptest::prelude::*;

    const DAY: i64 = 86_400;

    fn tweet(account_id: u64, tweet_id: u64, ts: i64, withheld: bool) -> TweetRecord {
        TweetRecord {
            tweet_id,
            account_id,
            created_at: Utc.timestamp_opt(ts, 0).unwrap(),
            text: format!("t{tweet_id}"),
            retweet_count: 1,
            like_count: 2,
            follower_count_at_post: 100,
            friend_count_at_post: 10,
            statuses_count_at_post: tweet_id,
            withheld_in: if withheld { vec!["TR".into()] } else { vec![] },
            is_retweet: false,
            retweeted_account_id: None,
        }
    }

    fn jsonl_line(tweet_id: u64, extra: &str) -> String {
        format!(
            r#"{{"tweet_id":{tweet_id},"account_id":1,"created_at":"2020-01-01T00:00:00Z","text":"x","retweet_count":1,"like_count":1,"follower_count":10,"friend_count":5,"statuses_count":2,"withheld_in_countries":[]{extra}}}"#
        )
    }

    #[test]
    fn parse_counts_wellformed_and_skipped() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("in.jsonl");
        let mut lines: Vec<String> = (0..8).map(|i| jsonl_line(i, "")).collect();
        lines.push("not json".into());
        lines.push(r#"{"account_id":1}"#.into());
        std::fs::write(&path, lines.join("\n")).unwrap();
        let out = parse_jsonl(&path).unwrap();
        assert_eq!(out.records.len(), 8);
        assert_eq!(out.skipped, 2);
    }

    #[test]
    fn parse_extracts_withheld_countries() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("in.jsonl");
        let line = r#"{"tweet_id":1,"account_id":1,"created_at":"2020-01-01T00:00:00Z","text":"x","withheld_in_countries":["DE","FR"]}"#;
        std::fs::write(&path, line).unwrap();
        let out = parse_jsonl(&path).unwrap();
        assert_eq!(out.records[0].withheld_in, vec!["DE".to_string(), "FR".to_string()]);
        assert_eq!(out.defaulted, 1);
    }

    #[test]
    fn parse_rejects_mostly_malformed_input() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("in.jsonl");
        let lines = vec![jsonl_line(1, ""), "garbage".into(), "more garbage".into()];
        std::fs::write(&path, lines.join("\n")).unwrap();
        assert!(matches!(
            parse_jsonl(&path).unwrap_err(),
            IngestError::CorruptInput { malformed: 2, total: 3 }
        ));
    }

    #[test]
    fn parse_missing_file() {
        assert!(matches!(
            parse_jsonl(Path::new("/nonexistent/file.jsonl")).unwrap_err(),
            IngestError::FileNotFound(_)
        ));
    }

    #[test]
    fn timelines_group_and_dedup() {
        let records = vec![
            tweet(1, 10, 100, false),
            tweet(2, 20, 50, false),
            tweet(1, 11, 200, false),
            tweet(2, 21, 60, false),
            tweet(1, 10, 100, false), // replay
            tweet(1, 12, 150, false),
            tweet(2, 22, 70, false),
        ];
        let (timelines, duplicates) = build_timelines(records);
        assert_eq!(timelines.len(), 2);
        assert_eq!(duplicates, 1);
        assert_eq!(timelines[&1].len(), 3);
        assert_eq!(timelines[&2].len(), 3);
    }

    #[test]
    fn timelines_empty_input() {
        let (timelines, duplicates) = build_timelines(vec![]);
        assert!(timelines.is_empty());
        assert_eq!(duplicates, 0);
    }

    #[test]
    fn event_from_trailing_withheld_run() {
        let flags = [false, false, true, true, true];
        let tweets: Vec<TweetRecord> = flags
            .iter()
            .enumerate()
            .map(|(i, &w)| tweet(1, i as u64, i as i64 * DAY, w))
            .collect();
        let timeline = validate_timeline(tweets).unwrap();
        let event = infer_withholding_event(&timeline).unwrap();
        assert_eq!(event.event_day, timeline.tweets[2].day());
    }

    #[test]
    fn event_whole_timeline_withheld() {
        let tweets: Vec<TweetRecord> =
            (0..3).map(|i| tweet(1, i, i as i64 * DAY, true)).collect();
        let timeline = validate_timeline(tweets).unwrap();
        let event = infer_withholding_event(&timeline).unwrap();
        assert_eq!(event.event_day, timeline.tweets[0].day());
    }

    #[test]
    fn no_event_when_last_tweet_not_withheld() {
        let flags = [true, false, true, false];
        let tweets: Vec<TweetRecord> = flags
            .iter()
            .enumerate()
            .map(|(i, &w)| tweet(1, i as u64, i as i64 * DAY, w))
            .collect();
        let timeline = validate_timeline(tweets).unwrap();
        assert!(infer_withholding_event(&timeline).is_none());
    }

    #[test]
    fn daily_series_sums_same_day_engagement() {
        let mut a = tweet(1, 1, 100, false);
        a.retweet_count = 3;
        let mut b = tweet(1, 2, 200, false);
        b.retweet_count = 5;
        let timeline = validate_timeline(vec![a, b]).unwrap();
        let series = build_daily_series(&timeline).unwrap();
        assert_eq!(series.len(), 1);
        assert_eq!(series[0].retweets_received_total, 8);
        assert_eq!(series[0].tweets_posted, 2);
    }

    #[test]
    fn daily_series_carries_forward_over_gaps() {
        let mut a = tweet(1, 1, 0, false);
        a.follower_count_at_post = 50;
        let mut b = tweet(1, 2, 3 * DAY, false);
        b.follower_count_at_post = 80;
        let timeline = validate_timeline(vec![a, b]).unwrap();
        let series = build_daily_series(&timeline).unwrap();
        assert_eq!(series.len(), 4);
        assert_eq!(series[1].tweets_posted, 0);
        assert_eq!(series[1].follower_count_end_of_day, 50);
        assert_eq!(series[2].follower_count_end_of_day, 50);
        assert_eq!(series[3].follower_count_end_of_day, 80);
    }

    #[test]
    fn cohort_labels_and_filtering() {
        // account 1: withheld; account 2: retweeted 1, has own tweets;
        // account 3: never retweeted a withheld account.
        let mut records = vec![
            tweet(1, 1, 0, true),
            tweet(1, 2, DAY, true),
            tweet(3, 30, 0, false),
        ];
        let mut rt = tweet(2, 20, DAY, false);
        rt.is_retweet = true;
        rt.retweeted_account_id = Some(1);
        records.push(rt);
        for i in 0..5 {
            records.push(tweet(2, 21 + i, 2 * DAY + i as i64, false));
        }
        let (timelines, _) = build_timelines(records);
        let events = infer_all_events(&timelines);
        let cohort = build_classification_cohort(&timelines, &events, 1);
        assert_eq!(
            cohort,
            vec![
                CohortLabelRecord { account_id: 1, label: 1 },
                CohortLabelRecord { account_id: 2, label: 0 },
            ]
        );
    }

    #[test]
    fn store_round_trip() {
        let records = vec![
            tweet(1, 1, 0, true),
            tweet(1, 2, DAY, true),
            tweet(2, 20, 50, false),
        ];
        let (timelines, _) = build_timelines(records);
        let mut store = Store { timelines, profiles: BTreeMap::new() };
        store.profiles.insert(
            1,
            AccountProfile {
                account_id: 1,
                screen_name: "alpha".into(),
                display_name: "Alpha".into(),
                description: "first".into(),
            },
        );
        let dir = tempfile::tempdir().unwrap();
        write_store(dir.path(), &store).unwrap();
        let loaded = read_store(dir.path()).unwrap();
        assert_eq!(loaded.timelines, store.timelines);
        assert_eq!(loaded.profiles[&1], store.profiles[&1]);
        assert_eq!(loaded.profiles[&2].screen_name, "user2");
    }

    #[test]
    fn store_rejects_bad_magic() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("timelines.bin"), b"NOTMAGIC plus junk").unwrap();
        assert!(matches!(
            read_store(dir.path()).unwrap_err(),
            IngestError::CorruptStore(_)
        ));
    }

    proptest! {
        #[test]
        fn timelines_permutation_invariant(seed in 0u64..1000) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let mut records: Vec<TweetRecord> = (0..30)
                .map(|i| tweet(i % 3, i, (i as i64 * 7919) % 40 * DAY, i % 4 == 0))
                .collect();
            let (base, _) = build_timelines(records.clone());
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            records.shuffle(&mut rng);
            let (shuffled, _) = build_timelines(records);
            prop_assert_eq!(base, shuffled);
        }

        #[test]
        fn daily_series_day_count_and_post_total(offsets in proptest::collection::vec(0i64..30, 1..40)) {
            let tweets: Vec<TweetRecord> = offsets
                .iter()
                .enumerate()
                .map(|(i, d)| tweet(1, i as u64, d * DAY + (i as i64 % 24) * 3600, false))
                .collect();
            let n = tweets.len() as u64;
            let timeline = validate_timeline(tweets).unwrap();
            let series = build_daily_series(&timeline).unwrap();
            let span = (timeline.last_day() - timeline.first_day()).num_days() as usize + 1;
            prop_assert_eq!(series.len(), span);
            prop_assert_eq!(series.iter().map(|r| r.tweets_posted).sum::<u64>(), n);
        }

        #[test]
        fn event_iff_trailing_withheld(flags in proptest::collection::vec(any::<bool>(), 1..30)) {
            let tweets: Vec<TweetRecord> = flags
                .iter()
                .enumerate()
                .map(|(i, &w)| tweet(1, i as u64, i as i64 * DAY, w))
                .collect();
            let timeline = validate_timeline(tweets).unwrap();
            let event = infer_withholding_event(&timeline);
            prop_assert_eq!(event.is_some(), *flags.last().unwrap());
            if let Some(e) = event {
                for t in &timeline.tweets {
                    if t.day() >= e.event_day {
                        prop_assert!(t.is_withheld());
                    }
                }
            }
        }
    }
}
