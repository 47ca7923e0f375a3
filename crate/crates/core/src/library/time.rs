//! Conversions between calendar records and chrono values.

use chrono::{Datelike, Duration, NaiveDate, NaiveDateTime, NaiveTime, Timelike};

use crate::types::{month_index, MONTHS, MONTH_NAMES, WEEKDAYS};
use crate::value::Value;

fn num_field(v: &Value, name: &str) -> Option<i64> {
    let n = v.field(name)?.as_num()?;
    (n.fract() == 0.0).then_some(n as i64)
}

fn month_field(v: &Value) -> Option<u32> {
    match v.field("month")? {
        Value::Enum(m) | Value::Str(m) => month_index(&m).map(|i| i as u32 + 1),
        Value::Num(n) if (1.0..=12.0).contains(&n) && n.fract() == 0.0 => Some(n as u32),
        _ => None,
    }
}

fn is_ctor(v: &Value, name: &str) -> bool {
    matches!(v, Value::Record { ctor, .. } if ctor == name)
}

pub fn date_from_value(v: &Value) -> Option<NaiveDate> {
    if is_ctor(v, "DateTime") {
        return date_from_value(&v.field("date")?);
    }
    if !is_ctor(v, "Date") {
        return None;
    }
    NaiveDate::from_ymd_opt(num_field(v, "year")? as i32, month_field(v)?, num_field(v, "day")? as u32)
}

pub fn time_from_value(v: &Value) -> Option<NaiveTime> {
    if !is_ctor(v, "Time") {
        return None;
    }
    NaiveTime::from_hms_opt(num_field(v, "hour")? as u32, num_field(v, "minute").unwrap_or(0) as u32, 0)
}

pub fn datetime_from_value(v: &Value) -> Option<NaiveDateTime> {
    if !is_ctor(v, "DateTime") {
        return None;
    }
    Some(date_from_value(&v.field("date")?)?.and_time(time_from_value(&v.field("time")?)?))
}

pub fn minutes_from_value(v: &Value) -> Option<i64> {
    if !is_ctor(v, "Duration") {
        return None;
    }
    num_field(v, "minutes")
}

pub fn date_value(d: NaiveDate) -> Value {
    Value::record(
        "Date",
        vec![
            ("year", Value::Num(d.year() as f64)),
            ("month", Value::Enum(MONTHS[d.month0() as usize].to_string())),
            ("day", Value::Num(d.day() as f64)),
        ],
    )
}

pub fn time_value(t: NaiveTime) -> Value {
    Value::record(
        "Time",
        vec![
            ("hour", Value::Num(t.hour() as f64)),
            ("minute", Value::Num(t.minute() as f64)),
        ],
    )
}

pub fn datetime_value(dt: NaiveDateTime) -> Value {
    Value::record("DateTime", vec![("date", date_value(dt.date())), ("time", time_value(dt.time()))])
}

pub fn duration_value(minutes: i64) -> Value {
    Value::record("Duration", vec![("minutes", Value::Num(minutes as f64))])
}

pub fn weekday_value(d: NaiveDate) -> Value {
    Value::Enum(WEEKDAYS[d.weekday().num_days_from_monday() as usize].to_string())
}

pub fn add_minutes(dt: NaiveDateTime, minutes: i64) -> Option<NaiveDateTime> {
    dt.checked_add_signed(Duration::minutes(minutes))
}

/// Whether some year has this month and day; with a year, whether that date exists.
pub fn valid_month_day(year: Option<i32>, month: u32, day: u32) -> bool {
    match year {
        Some(y) => NaiveDate::from_ymd_opt(y, month, day).is_some(),
        None => NaiveDate::from_ymd_opt(2000, month, day).is_some(),
    }
}

/// Gregorian Easter Sunday (anonymous computus).
pub fn easter(year: i32) -> NaiveDate {
    let a = year % 19;
    let b = year / 100;
    let c = year % 100;
    let d = b / 4;
    let e = b % 4;
    let f = (b + 8) / 25;
    let g = (b - f + 1) / 3;
    let h = (19 * a + b - d - g + 15) % 30;
    let i = c / 4;
    let k = c % 4;
    let l = (32 + 2 * e + 2 * i - h - k) % 7;
    let m = (a + 11 * h + 22 * l) / 451;
    let month = (h + l - 7 * m + 114) / 31;
    let day = (h + l - 7 * m + 114) % 31 + 1;
    NaiveDate::from_ymd_opt(year, month as u32, day as u32).expect("computus yields a valid date")
}

pub fn month_name(month: u32) -> &'static str {
    MONTH_NAMES[(month - 1) as usize]
}

pub fn ordinal(n: i64) -> String {
    let suffix = match (n % 10, n % 100) {
        (_, 11..=13) => "th",
        (1, _) => "st",
        (2, _) => "nd",
        (3, _) => "rd",
        _ => "th",
    };
    format!("{n}{suffix}")
}

/// `9:00 AM`, `12:30 PM`.
pub fn clock_text(t: NaiveTime) -> String {
    let (pm, hour) = t.hour12();
    format!("{hour}:{:02} {}", t.minute(), if pm { "PM" } else { "AM" })
}

/// `9 am`, `2:30 pm`, `noon`.
pub fn casual_time(t: NaiveTime) -> String {
    if t.hour() == 12 && t.minute() == 0 {
        return "noon".to_string();
    }
    let (pm, hour) = t.hour12();
    let suffix = if pm { "pm" } else { "am" };
    if t.minute() == 0 {
        format!("{hour} {suffix}")
    } else {
        format!("{hour}:{:02} {suffix}", t.minute())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn record_round_trip() {
        let dt = NaiveDate::from_ymd_opt(2020, 4, 27).unwrap().and_hms_opt(9, 0, 0).unwrap();
        let v = datetime_value(dt);
        assert_eq!(datetime_from_value(&v), Some(dt));
        assert_eq!(weekday_value(dt.date()), Value::Enum("monday".into()));
    }

    #[test]
    fn computus_matches_known_dates() {
        assert_eq!(easter(2020), NaiveDate::from_ymd_opt(2020, 4, 12).unwrap());
        assert_eq!(easter(2021), NaiveDate::from_ymd_opt(2021, 4, 4).unwrap());
        assert_eq!(easter(2019), NaiveDate::from_ymd_opt(2019, 4, 21).unwrap());
    }

    #[test]
    fn month_day_validity() {
        assert!(!valid_month_day(None, 2, 30));
        assert!(valid_month_day(None, 2, 29));
        assert!(!valid_month_day(Some(2021), 2, 29));
        assert!(!valid_month_day(None, 4, 31));
    }

    #[test]
    fn text_helpers() {
        assert_eq!(ordinal(30), "30th");
        assert_eq!(ordinal(21), "21st");
        assert_eq!(ordinal(12), "12th");
        let t = NaiveTime::from_hms_opt(14, 30, 0).unwrap();
        assert_eq!(clock_text(t), "2:30 PM");
        assert_eq!(casual_time(t), "2:30 pm");
        assert_eq!(casual_time(NaiveTime::from_hms_opt(12, 0, 0).unwrap()), "noon");
        assert_eq!(clock_text(NaiveTime::from_hms_opt(12, 0, 0).unwrap()), "12:00 PM");
    }
}
