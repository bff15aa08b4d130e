// @vitest-environment jsdom
import { describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import { renderPanel } from "../src/panel.js";
import { ReviewSession } from "../src/session.js";
import { FakeClient, samplePrediction } from "./fakes.js";

async function sessionWithPrediction(): Promise<{ session: ReviewSession; fake: FakeClient }> {
  const fake = new FakeClient();
  const session = new ReviewSession(fake as unknown as ApiClient);
  const pending = session.submit("int f(){return 0;}");
  fake.pendingPredicts[0]!.resolve(samplePrediction());
  await pending;
  return { session, fake };
}

describe("panel rendering", () => {
  it("shows one probability bar per label with the server's numbers", async () => {
    const { session } = await sessionWithPrediction();
    const container = document.createElement("div");
    renderPanel(container, session);
    const rows = container.querySelectorAll(".prob-row");
    expect(rows.length).toBe(2);
    expect(rows[0]!.querySelector(".prob-value")!.textContent).toBe("0.4871");
    expect(rows[0]!.getAttribute("data-label")).toBe("CWE119");
  });

  it("renders neighbors sorted with distance, bug and fix badges", async () => {
    const { session } = await sessionWithPrediction();
    const container = document.createElement("div");
    renderPanel(container, session);
    const rows = container.querySelectorAll(".neighbor-row");
    expect(rows.length).toBe(2);
    expect(rows[0]!.querySelector(".neighbor-distance")!.textContent).toBe("0.1200");
    expect(rows[0]!.querySelector(".badge-bug")!.textContent).toBe("BUG-001");
    expect(rows[0]!.querySelector(".badge-fix")!.textContent).toBe("FIX-002");
    expect(container.querySelector(".suggested-fix")!.textContent).toContain("FIX-002");
  });

  it("renders an error banner with the verbatim code", () => {
    const fake = new FakeClient();
    const session = new ReviewSession(fake as unknown as ApiClient);
    session.lastError = "unparsable_source";
    const container = document.createElement("div");
    renderPanel(container, session);
    expect(container.querySelector(".error-banner")!.textContent).toBe(
      "unparsable_source",
    );
  });

  it("disables vote buttons while a vote is in flight", async () => {
    const { session, fake } = await sessionWithPrediction();
    const container = document.createElement("div");
    const pending = session.castVote("mod1.c:sum_loop:1", "+");
    renderPanel(container, session);
    const buttons = container.querySelectorAll<HTMLButtonElement>(".vote-button");
    expect([...buttons].every((b) => b.disabled)).toBe(true);
    fake.pendingFeedbacks[0]!.resolve({ new_vote_count: 1, moved_distance: 0.03 });
    await pending;
    renderPanel(container, session);
    const after = container.querySelectorAll<HTMLButtonElement>(".vote-button");
    expect([...after].every((b) => !b.disabled)).toBe(true);
  });

  it("shows vote count and moved distance after a vote", async () => {
    const { session, fake } = await sessionWithPrediction();
    const pending = session.castVote("mod1.c:sum_loop:1", "+");
    fake.pendingFeedbacks[0]!.resolve({ new_vote_count: 3, moved_distance: 0.01438 });
    await pending;
    const container = document.createElement("div");
    renderPanel(container, session);
    const row = container.querySelector('[data-neighbor-id="mod1.c:sum_loop:1"]')!;
    expect(row.querySelector(".vote-count")!.textContent).toBe("votes: 3");
    expect(row.querySelector(".moved-distance")!.textContent).toBe("moved 0.01438");
    const history = container.querySelectorAll(".history-entry");
    expect(history.length).toBe(1);
  });
});
