import assert from "node:assert/strict";
import { test } from "node:test";

import { renderClaimPage, renderSlmdForm } from "../src/forms";
import { renderCard, renderSearchPage, renderStatsBanner, renderStudyDetail } from "../src/views";

const STATS = {
  searchable_studies: 1078,
  connected_repositories: 19,
  registered_studies: 516,
  studies_with_slmd: 398,
  studies_with_vlmd: 74,
  available_datasets: 118,
};

test("stats banner renders all six counters", () => {
  const html = renderStatsBanner(STATS);
  for (const value of ["1,078", "19", "516", "398", "74", "118"]) {
    assert.ok(html.includes(`>${value}<`), `missing ${value}`);
  }
  assert.equal((html.match(/data-stat=/g) ?? []).length, 6);
});

test("card escapes untrusted text and links to the study", () => {
  const html = renderCard({
    guid: "heal/study-0001",
    title: "<script>alert(1)</script>",
    repository: "repoA",
    state: "CLAIMED",
    blocks: ["grant_source", "slmd"],
  });
  assert.ok(!html.includes("<script>"));
  assert.ok(html.includes("&lt;script&gt;"));
  assert.ok(html.includes('href="#/study/heal/study-0001"'));
  assert.ok(html.includes("badge-claimed"));
});

test("search page renders facet buttons and pager state", () => {
  const html = renderSearchPage({
    query: { text: "pain", facets: { repository: ["repoA"] }, offset: 0, limit: 20 },
    response: {
      guids: ["heal/study-0001"],
      total: 45,
      results: [{ guid: "heal/study-0001", title: "T", repository: "repoA",
                  state: "CLAIMED", blocks: [] }],
    },
    facets: { facets: ["repository"], counts: { repository: { repoA: 30, repoB: 15 } } },
  });
  assert.ok(html.includes('data-facet="repository"'));
  assert.ok(html.includes("active"));
  assert.ok(html.includes("next &raquo;"));
  assert.ok(!html.includes("previous"));
  assert.ok(html.includes("45"));
});

test("study detail groups provenance blocks in a fixed order", () => {
  const html = renderStudyDetail({
    study: { guid: "heal/study-0002", award_number: "AWD-2", state: "SLMD_SUBMITTED",
             owner: "alice", nct_id: null, repository_id: "repoA" },
    document: {
      guid: "heal/study-0002", version: 5, created_at: "", updated_at: "",
      payload: {
        slmd: { fields: { objectives: { primary_objective: "x" } } },
        grant_source: { title: "G" },
        registration: { state: "SLMD_SUBMITTED" },
      },
    },
  });
  const grant = html.indexOf("Grant information");
  const slmd = html.indexOf("Study-level metadata");
  assert.ok(grant >= 0 && slmd > grant);
  assert.ok(html.includes("Update study-level metadata"));
  assert.ok(!html.includes("Claim this study"));
});

test("unregistered study offers the claim flow", () => {
  const html = renderStudyDetail({
    study: { guid: "heal/study-0003", award_number: "AWD-3", state: "UNREGISTERED",
             owner: null, nct_id: null, repository_id: null },
    document: { guid: "heal/study-0003", version: 1, created_at: "", updated_at: "",
                payload: { grant_source: {} } },
  });
  assert.ok(html.includes("Claim this study"));
});

test("claim page shows inline errors without losing the badge", () => {
  const html = renderClaimPage("heal/study-0001", "UNREGISTERED", "BadClaimToken: nope");
  assert.ok(html.includes("claim-error"));
  assert.ok(html.includes("badge-unregistered"));
});

test("slmd form marks errored fields and disables submit in flight", () => {
  const withErrors = renderSlmdForm("heal/s", {}, { "design.study_type": "required" });
  assert.ok(withErrors.includes('data-field="design.study_type"'));
  assert.ok(withErrors.includes("has-error"));
  const inFlight = renderSlmdForm("heal/s", {}, {}, [], true);
  assert.ok(inFlight.includes("disabled"));
});
