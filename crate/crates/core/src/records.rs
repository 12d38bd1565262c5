//! Canonical record types shared by the ingestion, impact, and classification
//! pipelines, plus the validation that turns raw parsed fields into them.

use chrono::{DateTime, NaiveDate, Utc};
use serde::Deserialize;
use thiserror::Error;

/// One tweet as observed in an archive sample, with the engagement counts and
/// account counters snapshotted at posting time.
#[derive(Debug, Clone, PartialEq)]
pub struct TweetRecord {
    pub tweet_id: u64,
    pub account_id: u64,
    /// UTC, second precision.
    pub created_at: DateTime<Utc>,
    pub text: String,
    pub retweet_count: u64,
    pub like_count: u64,
    pub follower_count_at_post: u64,
    pub friend_count_at_post: u64,
    pub statuses_count_at_post: u64,
    /// ISO country codes the tweet is withheld in; empty means not withheld.
    pub withheld_in: Vec<String>,
    pub is_retweet: bool,
    /// Account whose tweet this retweets, when the archive carries it.
    pub retweeted_account_id: Option<u64>,
}

impl TweetRecord {
    /// A tweet counts as withheld exactly when `withheld_in` is non-empty.
    pub fn is_withheld(&self) -> bool {
        !self.withheld_in.is_empty()
    }

    /// UTC calendar day the tweet was posted on.
    pub fn day(&self) -> NaiveDate {
        self.created_at.date_naive()
    }
}

/// Profile text fields fused into the classifier when profile features are
/// enabled.
#[derive(Debug, Clone, PartialEq)]
pub struct AccountProfile {
    pub account_id: u64,
    pub screen_name: String,
    pub display_name: String,
    pub description: String,
}

/// Time-ordered tweets of one account.
#[derive(Debug, Clone, PartialEq)]
pub struct AccountTimeline {
    pub account_id: u64,
    /// Sorted ascending by `(created_at, tweet_id)`.
    pub tweets: Vec<TweetRecord>,
}

impl AccountTimeline {
    pub fn len(&self) -> usize {
        self.tweets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tweets.is_empty()
    }

    pub fn first_day(&self) -> NaiveDate {
        self.tweets.first().expect("timeline non-empty").day()
    }

    pub fn last_day(&self) -> NaiveDate {
        self.tweets.last().expect("timeline non-empty").day()
    }
}

/// Proxy withholding event: the day from which every subsequent tweet of the
/// account is withheld.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WithholdingEvent {
    pub account_id: u64,
    /// UTC date of the first tweet of the trailing withheld run.
    pub event_day: NaiveDate,
}

#[derive(Debug, Error, PartialEq)]
pub enum RecordError {
    #[error("missing required field `{0}`")]
    MissingField(&'static str),
    #[error("unparseable timestamp `{0}`")]
    BadTimestamp(String),
    #[error("negative count in field `{0}`")]
    BadCount(&'static str),
    #[error("timeline mixes accounts {0} and {1}")]
    MixedAccounts(u64, u64),
    #[error("empty timeline")]
    EmptyTimeline,
}

/// Raw tweet fields as parsed from one archive line, before validation.
/// Field names match the JSONL contract exactly.
#[derive(Debug, Clone, Default, Deserialize)]
pub struct RawTweet {
    pub tweet_id: Option<u64>,
    pub account_id: Option<u64>,
    pub created_at: Option<String>,
    pub text: Option<String>,
    pub retweet_count: Option<i64>,
    pub like_count: Option<i64>,
    pub follower_count: Option<i64>,
    pub friend_count: Option<i64>,
    pub statuses_count: Option<i64>,
    pub withheld_in_countries: Option<Vec<String>>,
    pub is_retweet: Option<bool>,
    pub retweeted_account_id: Option<u64>,
}

/// A validated record plus a flag set when any optional count was absent and
/// defaulted to zero.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidatedTweet {
    pub record: TweetRecord,
    pub defaulted: bool,
}

fn nonneg(value: Option<i64>, field: &'static str, defaulted: &mut bool) -> Result<u64, RecordError> {
    match value {
        Some(v) if v < 0 => Err(RecordError::BadCount(field)),
        Some(v) => Ok(v as u64),
        None => {
            *defaulted = true;
            Ok(0)
        }
    }
}

/// Normalizes a raw field map into a [`TweetRecord`].
///
/// `tweet_id`, `account_id`, `created_at`, and `text` are required; counts
/// default to zero (flagged), negative counts are rejected, and timestamps
/// must parse as ISO-8601.
pub fn validate_tweet_record(raw: RawTweet) -> Result<ValidatedTweet, RecordError> {
    let tweet_id = raw.tweet_id.ok_or(RecordError::MissingField("tweet_id"))?;
    let account_id = raw.account_id.ok_or(RecordError::MissingField("account_id"))?;
    let created_raw = raw.created_at.ok_or(RecordError::MissingField("created_at"))?;
    let text = raw.text.ok_or(RecordError::MissingField("text"))?;

    let created_at = DateTime::parse_from_rfc3339(&created_raw)
        .map_err(|_| RecordError::BadTimestamp(created_raw.clone()))?
        .with_timezone(&Utc);

    let mut defaulted = false;
    let record = TweetRecord {
        tweet_id,
        account_id,
        created_at,
        text,
        retweet_count: nonneg(raw.retweet_count, "retweet_count", &mut defaulted)?,
        like_count: nonneg(raw.like_count, "like_count", &mut defaulted)?,
        follower_count_at_post: nonneg(raw.follower_count, "follower_count", &mut defaulted)?,
        friend_count_at_post: nonneg(raw.friend_count, "friend_count", &mut defaulted)?,
        statuses_count_at_post: nonneg(raw.statuses_count, "statuses_count", &mut defaulted)?,
        withheld_in: raw.withheld_in_countries.unwrap_or_default(),
        is_retweet: raw.is_retweet.unwrap_or(false),
        retweeted_account_id: raw.retweeted_account_id,
    };
    Ok(ValidatedTweet { record, defaulted })
}

/// Builds a timeline from records of a single account, sorting ascending by
/// `(created_at, tweet_id)`. The sort is stable, so applying it twice yields
/// identical output.
pub fn validate_timeline(mut tweets: Vec<TweetRecord>) -> Result<AccountTimeline, RecordError> {
    let first = tweets.first().ok_or(RecordError::EmptyTimeline)?;
    let account_id = first.account_id;
    if let Some(other) = tweets.iter().find(|t| t.account_id != account_id) {
        return Err(RecordError::MixedAccounts(account_id, other.account_id));
    }
    tweets.sort_by(|a, b| (a.created_at, a.tweet_id).cmp(&(b.created_at, b.tweet_id)));
    Ok(AccountTimeline { account_id, tweets })
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::TimeZone;
    use proptest::prelude::*;

    fn tweet(account_id: u64, tweet_id: u64, ts: i64) -> TweetRecord {
        TweetRecord {
            tweet_id,
            account_id,
            created_at: Utc.timestamp_opt(ts, 0).unwrap(),
            text: format!("tweet {tweet_id}"),
            retweet_count: 0,
            like_count: 0,
            follower_count_at_post: 0,
            friend_count_at_post: 0,
            statuses_count_at_post: 0,
            withheld_in: vec![],
            is_retweet: false,
            retweeted_account_id: None,
        }
    }

    fn raw_full() -> RawTweet {
        RawTweet {
            tweet_id: Some(1),
            account_id: Some(2),
            created_at: Some("2020-03-01T12:00:00Z".to_string()),
            text: Some("hello".to_string()),
            retweet_count: Some(3),
            like_count: Some(4),
            follower_count: Some(5),
            friend_count: Some(6),
            statuses_count: Some(7),
            withheld_in_countries: Some(vec!["TR".to_string()]),
            is_retweet: Some(false),
            retweeted_account_id: None,
        }
    }

    #[test]
    fn full_record_is_valid_and_withheld() {
        let v = validate_tweet_record(raw_full()).unwrap();
        assert!(!v.defaulted);
        assert!(v.record.is_withheld());
        assert_eq!(v.record.withheld_in, vec!["TR".to_string()]);
        assert_eq!(v.record.created_at.timestamp(), 1583064000);
    }

    #[test]
    fn missing_created_at_is_rejected() {
        let mut raw = raw_full();
        raw.created_at = None;
        assert_eq!(
            validate_tweet_record(raw).unwrap_err(),
            RecordError::MissingField("created_at")
        );
    }

    #[test]
    fn bad_timestamp_is_rejected() {
        let mut raw = raw_full();
        raw.created_at = Some("yesterday-ish".to_string());
        assert!(matches!(
            validate_tweet_record(raw).unwrap_err(),
            RecordError::BadTimestamp(_)
        ));
    }

    #[test]
    fn negative_count_is_rejected() {
        let mut raw = raw_full();
        raw.retweet_count = Some(-1);
        assert_eq!(
            validate_tweet_record(raw).unwrap_err(),
            RecordError::BadCount("retweet_count")
        );
    }

    #[test]
    fn missing_counts_default_to_zero_with_flag() {
        let mut raw = raw_full();
        raw.like_count = None;
        let v = validate_tweet_record(raw).unwrap();
        assert!(v.defaulted);
        assert_eq!(v.record.like_count, 0);
    }

    #[test]
    fn timeline_sorts_out_of_order_tweets() {
        let t = validate_timeline(vec![tweet(1, 3, 300), tweet(1, 1, 100), tweet(1, 2, 200)]).unwrap();
        let ids: Vec<u64> = t.tweets.iter().map(|t| t.tweet_id).collect();
        assert_eq!(ids, vec![1, 2, 3]);
    }

    #[test]
    fn empty_timeline_is_rejected() {
        assert_eq!(validate_timeline(vec![]).unwrap_err(), RecordError::EmptyTimeline);
    }

    #[test]
    fn mixed_accounts_are_rejected() {
        let err = validate_timeline(vec![tweet(1, 1, 100), tweet(2, 2, 200)]).unwrap_err();
        assert_eq!(err, RecordError::MixedAccounts(1, 2));
    }

    #[test]
    fn equal_timestamps_break_ties_by_tweet_id() {
        let t = validate_timeline(vec![tweet(1, 9, 100), tweet(1, 4, 100)]).unwrap();
        let ids: Vec<u64> = t.tweets.iter().map(|t| t.tweet_id).collect();
        assert_eq!(ids, vec![4, 9]);
    }

    proptest! {
        #[test]
        fn timeline_sorted_and_idempotent(perm in proptest::collection::vec((0u64..50, 0i64..1000), 1..40)) {
            let tweets: Vec<TweetRecord> = perm
                .iter()
                .enumerate()
                .map(|(i, (id_salt, ts))| tweet(7, id_salt * 1000 + i as u64, *ts))
                .collect();
            let once = validate_timeline(tweets).unwrap();
            for pair in once.tweets.windows(2) {
                prop_assert!((pair[0].created_at, pair[0].tweet_id) <= (pair[1].created_at, pair[1].tweet_id));
            }
            let twice = validate_timeline(once.tweets.clone()).unwrap();
            prop_assert_eq!(once, twice);
        }
    }
}
