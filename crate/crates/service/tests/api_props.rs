//! Arbitrary requests never escape the error contract: every response is a
//! success or an ApiError body, and nothing panics the server.

mod common;

use std::sync::OnceLock;

use common::*;
use proptest::prelude::*;
use reqwest::blocking::Response;

fn fixture() -> &'static (Fixture, String) {
    static FX: OnceLock<(Fixture, String)> = OnceLock::new();
    FX.get_or_init(|| {
        let fx = Fixture::new();
        let token = fx.basic();
        (fx, token)
    })
}

fn check(resp: Response, allowed: &[u16]) -> Result<(), TestCaseError> {
    let status = resp.status().as_u16();
    prop_assert!(allowed.contains(&status), "status {}", status);
    if status >= 300 {
        assert_api_error(resp, status);
    }
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 96, ..ProptestConfig::default() })]

    #[test]
    fn arbitrary_queries_are_ok_or_bad_request(
        key in prop::sample::select(vec!["plate", "camera", "from", "to", "limit", "other"]),
        value in "[ -~]{0,12}",
    ) {
        let (fx, token) = fixture();
        let query = form_urlencoded::Serializer::new(String::new()).append_pair(key, &value).finish();
        check(fx.get(&format!("/api/sightings?{query}"), token), &[200, 400])?;
        check(fx.get(&format!("/api/path?plate=KA01&{query}"), token), &[200, 400])?;
    }

    #[test]
    fn arbitrary_ingest_bodies_are_rejected_cleanly(body in prop::collection::vec(any::<u8>(), 0..256)) {
        let (fx, _) = fixture();
        let resp = fx.client.post(fx.url("/api/ingest")).header("x-api-key", &fx.cam1_key).body(body).send().unwrap();
        check(resp, &[422])?;
    }

    #[test]
    fn arbitrary_login_bodies_never_authenticate(user in "[a-z]{0,8}", pw in "[ -~]{0,16}") {
        let (fx, _) = fixture();
        let body = serde_json::json!({"username": user, "password": pw});
        check(fx.client.post(fx.url("/api/login")).json(&body).send().unwrap(), &[400, 401])?;
    }
}
