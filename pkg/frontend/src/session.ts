// Client-side review session: holds the submitted source, the latest
// prediction snapshot, per-neighbor vote state, and an append-only history
// of votes. All displayed numbers come from the server.
//
// Concurrency: at most one in-flight request per action. Submissions carry a
// sequence number and a stale response (superseded by a newer submission) is
// discarded. Vote clicks while a vote is pending are ignored, so one click
// posts exactly one vote.

import {
  ApiClient,
  ApiRequestError,
  FeedbackResponse,
  PredictResponse,
} from "./api.js";

export type VoteEntry = {
  neighborId: string;
  polarity: "+" | "-";
  voteCount: number;
  movedDistance: number;
  votesGiven: number;
};

export type NeighborVoteState = {
  voteCount: number;
  lastMovedDistance: number | null;
};

export type SessionListener = () => void;

export class ReviewSession {
  source = "";
  prediction: PredictResponse | null = null;
  lastError: string | null = null;
  voteHistory: VoteEntry[] = [];
  neighborVotes = new Map<string, NeighborVoteState>();

  private submitSeq = 0;
  private submitting = false;
  private votePending = false;
  // Votes keep accumulating against the first submission of this source;
  // later re-predicts of the same text see the moved vector server-side.
  private voteAnchorId: string | null = null;
  private listeners: SessionListener[] = [];

  constructor(private readonly client: ApiClient) {}

  onChange(listener: SessionListener): void {
    this.listeners.push(listener);
  }

  private notify(): void {
    for (const listener of this.listeners) listener();
  }

  get canVote(): boolean {
    return this.prediction !== null && !this.votePending;
  }

  get isBusy(): boolean {
    return this.submitting || this.votePending;
  }

  get anchorId(): string | null {
    return this.voteAnchorId;
  }

  async submit(source: string): Promise<PredictResponse | null> {
    const seq = ++this.submitSeq;
    this.submitting = true;
    this.lastError = null;
    const sourceChanged = source !== this.source;
    this.notify();
    try {
      const response = await this.client.predict(source, undefined, true);
      if (seq !== this.submitSeq) return null; // superseded, discard
      this.source = source;
      this.prediction = response;
      if (sourceChanged || this.voteAnchorId === null) {
        this.voteAnchorId = response.function_id;
        this.voteHistory = [];
        this.neighborVotes = new Map();
      }
      return response;
    } catch (error) {
      if (seq !== this.submitSeq) return null;
      this.prediction = null;
      this.voteAnchorId = null;
      this.lastError =
        error instanceof ApiRequestError ? error.code : String(error);
      return null;
    } finally {
      if (seq === this.submitSeq) {
        this.submitting = false;
        this.notify();
      }
    }
  }

  /** Re-run the prediction for the current source; neighbor distances then
   * reflect every vote cast so far (the server recomputes them). */
  async refresh(): Promise<PredictResponse | null> {
    if (!this.source) return null;
    return this.submit(this.source);
  }

  async castVote(
    neighborId: string,
    polarity: "+" | "-",
  ): Promise<FeedbackResponse | null> {
    if (!this.canVote || this.voteAnchorId === null) return null;
    this.votePending = true;
    this.lastError = null;
    this.notify();
    try {
      const result = await this.client.feedback(
        this.voteAnchorId,
        neighborId,
        polarity,
      );
      const info = await this.client.getFunction(this.voteAnchorId);
      this.neighborVotes.set(neighborId, {
        voteCount: result.new_vote_count,
        lastMovedDistance: result.moved_distance,
      });
      this.voteHistory.push({
        neighborId,
        polarity,
        voteCount: result.new_vote_count,
        movedDistance: result.moved_distance,
        votesGiven: info.votes.given,
      });
      return result;
    } catch (error) {
      this.lastError =
        error instanceof ApiRequestError ? error.code : String(error);
      return null;
    } finally {
      this.votePending = false;
      this.notify();
    }
  }
}
