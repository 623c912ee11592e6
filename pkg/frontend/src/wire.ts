// Wire types and the JSON client. POST endpoints authenticate with an
// auth_token field in the body; the two GET endpoints use a bearer header.
// Engine rejections (a refused bid) come back as 200s with accepted:false,
// so only transport and auth/validation failures surface as ApiError.

export interface Money {
  amount: number;
  currency: string;
}

export interface LadderEntry {
  label: string;
  value: Money | string; // observers get percent strings, everyone else Money
  own?: boolean;
}

export interface SlotView {
  slot_id: string;
  description: string;
  quantity: number;
  unit: string;
  bid_count: number;
  entries: LadderEntry[];
  own_rank?: number | null;
  competitor_count?: number;
}

export interface IdentityEntry {
  person_id: string;
  name: string;
  company_id: string | null;
}

export interface AuctionView {
  auction_id: string;
  title: string;
  format: string;
  viewer_role: string;
  phase: string;
  extension_count: number;
  current_end: number;
  server_time: number;
  slots: Record<string, SlotView>;
  tick_size?: number;
  identity_map?: Record<string, IdentityEntry>;
}

export interface StreamMessage {
  seq: number;
  kind: string;
  payload: Record<string, unknown>;
  server_time: number;
}

export interface PollResponse {
  server_time: number;
  messages: StreamMessage[];
  view: AuctionView;
  next_poll_ms: number;
  new_cursor: number;
}

export type BidReply =
  | { accepted: true; server_time: number; rank: number; new_end: number; bid_id: string }
  | { accepted: false; server_time: number; reason: string };

export interface LoginReply {
  auth_token: string;
  person_id: string;
  server_time: number;
}

export interface AuctionRow {
  auction_id: string;
  title: string;
  format: string;
  phase: string;
  role: string;
  start_time: number;
  current_end: number;
}

export interface ParticipantRow {
  person_id: string;
  name: string;
  company_id: string | null;
  role: string;
  slot_id: string | null;
  invited: boolean;
  contract_signed: boolean;
  password_delivered: boolean;
  admitted: boolean;
  banned: boolean;
  pseudonym: string | null;
}

export interface AdminStatus {
  server_time: number;
  auction_id: string;
  phase: string;
  current_end: number;
  hard_cap_at: number;
  extension_count: number;
  participants: ParticipantRow[];
}

// Minimal response surface so tests can fake the transport without
// constructing real Response objects.
export interface TransportResponse {
  status: number;
  json(): Promise<unknown>;
}

export type Transport = (url: string, init: RequestInit) => Promise<TransportResponse>;

export class ApiError extends Error {
  constructor(
    readonly code: string,
    readonly status: number,
  ) {
    super(`${status} ${code}`);
  }
}

const defaultTransport: Transport = (url, init) => fetch(url, init);

export class ApiClient {
  constructor(
    readonly baseUrl: string,
    private readonly transport: Transport = defaultTransport,
  ) {}

  private async post(path: string, body: Record<string, unknown>): Promise<unknown> {
    const res = await this.transport(this.baseUrl + path, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
    const parsed = (await res.json()) as Record<string, unknown>;
    if (res.status !== 200) {
      throw new ApiError(String(parsed.error ?? "UnknownError"), res.status);
    }
    return parsed;
  }

  private async get(path: string, token: string): Promise<unknown> {
    const res = await this.transport(this.baseUrl + path, {
      method: "GET",
      headers: { Authorization: `Bearer ${token}` },
    });
    const parsed = (await res.json()) as Record<string, unknown>;
    if (res.status !== 200) {
      throw new ApiError(String(parsed.error ?? "UnknownError"), res.status);
    }
    return parsed;
  }

  login(username: string, password: string): Promise<LoginReply> {
    return this.post("/api/login", { username, password }) as Promise<LoginReply>;
  }

  poll(
    token: string,
    auctionId: string,
    cursor: number,
    clientSendTime?: number,
  ): Promise<PollResponse> {
    return this.post("/api/poll", {
      auth_token: token,
      auction_id: auctionId,
      cursor,
      client_send_time: clientSendTime,
    }) as Promise<PollResponse>;
  }

  bid(
    token: string,
    auctionId: string,
    slotId: string,
    amount: number,
    cursorAtSubmit: number,
    clientSendTime?: number,
  ): Promise<BidReply> {
    return this.post("/api/bid", {
      auth_token: token,
      auction_id: auctionId,
      slot_id: slotId,
      amount,
      cursor_at_submit: cursorAtSubmit,
      client_send_time: clientSendTime,
    }) as Promise<BidReply>;
  }

  listAuctions(token: string): Promise<{ server_time: number; auctions: AuctionRow[] }> {
    return this.get("/api/auctions", token) as Promise<{
      server_time: number;
      auctions: AuctionRow[];
    }>;
  }

  adminStatus(token: string, auctionId: string): Promise<AdminStatus> {
    return this.get(`/api/admin/${encodeURIComponent(auctionId)}/status`, token) as Promise<AdminStatus>;
  }

  adminAdmit(token: string, auctionId: string, personId: string): Promise<unknown> {
    return this.post(`/api/admin/${encodeURIComponent(auctionId)}/admit`, {
      auth_token: token,
      person_id: personId,
    });
  }

  adminBan(token: string, auctionId: string, personId: string): Promise<unknown> {
    return this.post(`/api/admin/${encodeURIComponent(auctionId)}/ban`, {
      auth_token: token,
      person_id: personId,
    });
  }

  adminProlong(token: string, auctionId: string, deltaMs: number): Promise<unknown> {
    return this.post(`/api/admin/${encodeURIComponent(auctionId)}/prolong`, {
      auth_token: token,
      delta_ms: deltaMs,
    });
  }

  adminCancel(token: string, auctionId: string): Promise<unknown> {
    return this.post(`/api/admin/${encodeURIComponent(auctionId)}/cancel`, {
      auth_token: token,
    });
  }

  createAuction(token: string, payload: Record<string, unknown>): Promise<{ auction_id: string }> {
    return this.post("/api/admin/auction", { auth_token: token, ...payload }) as Promise<{
      auction_id: string;
    }>;
  }
}
