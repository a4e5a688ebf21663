import assert from "node:assert/strict";
import { test } from "node:test";

import { errorBox, esc, fraction, stateBadge, table, timestamp } from "../src/render.js";

test("esc neutralizes markup", () => {
  assert.equal(esc(`<img onerror="x">&`), "&lt;img onerror=&quot;x&quot;&gt;&amp;");
  assert.equal(esc(null), "");
});

test("state badges carry the state as a data attribute", () => {
  const badge = stateBadge("Suspended");
  assert.match(badge, /data-state="Suspended"/);
  assert.match(badge, /badge-warn/);
  assert.match(stateBadge("Active"), /badge-ok/);
  assert.match(stateBadge("Decommissioned"), /badge-dead/);
});

test("table renders rows or an empty note", () => {
  const html = table(["a", "b"], [["1", "2"]]);
  assert.match(html, /<th>a<\/th><th>b<\/th>/);
  assert.match(html, /<td>1<\/td><td>2<\/td>/);
  assert.match(table(["a"], [], "none here"), /none here/);
});

test("timestamps render as UTC and tolerate absent values", () => {
  assert.equal(timestamp(0), "1970-01-01 00:00:00");
  assert.equal(timestamp(null), "—");
});

test("fractions keep three digits", () => {
  assert.equal(fraction(0.9166666), "0.917");
  assert.equal(fraction(null), "—");
});

test("error box shows the envelope verbatim", () => {
  const html = errorBox("scope_violation", "outside scopes", "field x");
  assert.match(html, /data-code="scope_violation"/);
  assert.match(html, /outside scopes/);
  assert.match(html, /field x/);
});
