import assert from "node:assert/strict";
import { test } from "node:test";

import { buildSearchQuery, SearchQuery } from "../src/api";
import { decodeSearchState, encodeSearchState, toggleFacet } from "../src/state";

test("query state round-trips through the URL hash", () => {
  const query = {
    text: "opioid pain",
    facets: { repository: ["repo-01", "repo-02"], registration_state: ["CLAIMED"] },
    offset: 40,
  };
  const decoded = decodeSearchState(encodeSearchState(query));
  assert.equal(decoded.text, "opioid pain");
  assert.deepEqual(decoded.facets, query.facets);
  assert.equal(decoded.offset, 40);
});

test("empty state encodes to the bare search route", () => {
  assert.equal(encodeSearchState({}), "#/search");
  const decoded = decodeSearchState("#/search");
  assert.equal(decoded.text, undefined);
  assert.deepEqual(decoded.facets, {});
  assert.equal(decoded.offset, 0);
});

test("toggleFacet adds, removes, and resets pagination", () => {
  let query: SearchQuery = { facets: {}, offset: 60 };
  query = toggleFacet(query, "repository", "repoA");
  assert.deepEqual(query.facets, { repository: ["repoA"] });
  assert.equal(query.offset, 0);
  query = toggleFacet(query, "repository", "repoB");
  assert.deepEqual(query.facets, { repository: ["repoA", "repoB"] });
  query = toggleFacet(query, "repository", "repoA");
  assert.deepEqual(query.facets, { repository: ["repoB"] });
  query = toggleFacet(query, "repository", "repoB");
  assert.deepEqual(query.facets, {});
});

test("buildSearchQuery emits only documented parameter names", () => {
  const qs = buildSearchQuery({
    text: "pain",
    facets: { repository: ["a"], study_type: ["x", "y"] },
    limit: 20,
    offset: 40,
  });
  const params = new URLSearchParams(qs);
  const allowed = /^(text|limit|offset|facet\.[a-z_]+)$/;
  for (const key of params.keys()) {
    assert.match(key, allowed);
  }
  assert.equal(params.getAll("facet.study_type").length, 2);
});
