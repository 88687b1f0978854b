/**
 * Single-page UI: login, registration, user management and audit views.
 *
 * All rendering goes through DOM construction (never innerHTML with user
 * data). Any 401 from the API clears the session and returns to the login
 * view, whatever the user was doing at the time.
 */

import {
  ApiClient,
  ApiError,
  AuditEntry,
  PublicUser,
  UnauthorizedError,
} from "./api.js";
import { cpfAccepted, validateEmail, validateRegistration } from "./validation.js";

type ViewName = "login" | "register" | "users" | "audit";

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string> = {},
  children: (Node | string)[] = [],
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [key, value] of Object.entries(attrs)) {
    node.setAttribute(key, value);
  }
  for (const child of children) {
    node.append(child);
  }
  return node;
}

export class App {
  view: ViewName = "login";

  private pending: Promise<unknown> = Promise.resolve();

  constructor(
    private readonly root: HTMLElement,
    readonly api: ApiClient,
  ) {}

  start(): void {
    this.showLogin();
  }

  /** Resolves once all in-flight handlers have settled (used by tests). */
  async whenIdle(): Promise<void> {
    let snapshot: Promise<unknown>;
    do {
      snapshot = this.pending;
      await snapshot.catch(() => undefined);
    } while (snapshot !== this.pending);
  }

  private track(work: Promise<unknown>): void {
    this.pending = work.catch(() => undefined);
  }

  /**
   * Run an API-backed action; a 401 anywhere means the session is no longer
   * valid, so drop it and go back to login.
   */
  private guard(work: () => Promise<void>): void {
    this.track(
      work().catch((e: unknown) => {
        if (e instanceof UnauthorizedError) {
          this.api.token = null;
          this.showLogin("Your session has expired. Please sign in again.");
          return;
        }
        throw e;
      }),
    );
  }

  // -- chrome ---------------------------------------------------------------

  private render(view: ViewName, ...content: HTMLElement[]): void {
    this.view = view;
    this.root.replaceChildren(this.nav(), ...content);
  }

  private nav(): HTMLElement {
    const authed = this.api.token !== null;
    const links = el("ul", { id: "nav-links", class: "nav-links" });
    const item = (id: string, label: string, onClick: () => void) => {
      const button = el("button", { id, type: "button" }, [label]);
      button.addEventListener("click", onClick);
      links.append(el("li", {}, [button]));
    };
    if (authed) {
      item("nav-users", "Users", () => this.showUsers());
      item("nav-audit", "Audit log", () => this.showAudit());
      item("nav-logout", "Sign out", () => this.logout());
    } else {
      item("nav-login", "Sign in", () => this.showLogin());
      item("nav-register", "Create account", () => this.showRegister());
    }
    const toggle = el("button", {
      id: "nav-toggle",
      type: "button",
      class: "nav-toggle",
      "aria-label": "Toggle navigation",
      "aria-expanded": "false",
    }, ["☰"]);
    toggle.addEventListener("click", () => {
      const open = links.classList.toggle("open");
      toggle.setAttribute("aria-expanded", String(open));
    });
    return el("nav", { class: "nav" }, [
      el("span", { class: "brand" }, ["Identity Console"]),
      toggle,
      links,
    ]);
  }

  private message(id: string, text: string, kind: "error" | "info"): HTMLElement {
    return el("p", { id, class: kind, role: kind === "error" ? "alert" : "status" }, [text]);
  }

  // -- login ----------------------------------------------------------------

  showLogin(notice?: string): void {
    const error = this.message("login-error", "", "error");
    const email = el("input", { id: "login-email", type: "email", autocomplete: "username" });
    const password = el("input", {
      id: "login-password",
      type: "password",
      autocomplete: "current-password",
    });
    const form = el("form", { id: "login-form" }, [
      el("label", { for: "login-email" }, ["Email"]),
      email,
      el("label", { for: "login-password" }, ["Password"]),
      password,
      el("button", { id: "login-submit", type: "submit" }, ["Sign in"]),
    ]);
    form.addEventListener("submit", (event) => {
      event.preventDefault();
      this.track(
        this.api
          .login(email.value, password.value)
          .then(() => this.showUsers())
          .catch((e: unknown) => {
            if (e instanceof ApiError) {
              error.textContent = e.detail;
              return;
            }
            throw e;
          }),
      );
    });
    const content: HTMLElement[] = [el("h1", {}, ["Sign in"])];
    if (notice !== undefined) {
      content.push(this.message("login-notice", notice, "info"));
    }
    content.push(error, form);
    this.render("login", ...content);
  }

  // -- registration ---------------------------------------------------------

  showRegister(): void {
    const error = this.message("register-error", "", "error");
    const fields = {
      name: el("input", { id: "register-name", type: "text" }),
      cpf: el("input", { id: "register-cpf", type: "text", inputmode: "numeric" }),
      email: el("input", { id: "register-email", type: "email" }),
      password: el("input", { id: "register-password", type: "password" }),
    };
    const fieldErrors = {
      name: this.message("register-name-error", "", "error"),
      cpf: this.message("register-cpf-error", "", "error"),
      email: this.message("register-email-error", "", "error"),
      password: this.message("register-password-error", "", "error"),
    };
    // Live feedback on the two fields with non-obvious rules.
    fields.cpf.addEventListener("input", () => {
      fieldErrors.cpf.textContent =
        fields.cpf.value === "" || cpfAccepted(fields.cpf.value)
          ? ""
          : "CPF is not valid";
    });
    fields.email.addEventListener("input", () => {
      fieldErrors.email.textContent =
        fields.email.value === "" || validateEmail(fields.email.value)
          ? ""
          : "email address is not valid";
    });
    const form = el("form", { id: "register-form" }, [
      el("label", { for: "register-name" }, ["Full name"]),
      fields.name,
      fieldErrors.name,
      el("label", { for: "register-cpf" }, ["CPF"]),
      fields.cpf,
      fieldErrors.cpf,
      el("label", { for: "register-email" }, ["Email"]),
      fields.email,
      fieldErrors.email,
      el("label", { for: "register-password" }, ["Password"]),
      fields.password,
      fieldErrors.password,
      el("button", { id: "register-submit", type: "submit" }, ["Create account"]),
    ]);
    form.addEventListener("submit", (event) => {
      event.preventDefault();
      const input = {
        name: fields.name.value,
        cpf: fields.cpf.value,
        email: fields.email.value,
        password: fields.password.value,
      };
      const problems = validateRegistration(input);
      for (const key of ["name", "cpf", "email", "password"] as const) {
        fieldErrors[key].textContent = problems.get(key) ?? "";
      }
      if (problems.size > 0) {
        return;
      }
      this.track(
        this.api
          .register(input)
          .then(() => this.showLogin("Account created. Please sign in."))
          .catch((e: unknown) => {
            if (e instanceof ApiError) {
              error.textContent = e.detail;
              return;
            }
            throw e;
          }),
      );
    });
    this.render("register", el("h1", {}, ["Create account"]), error, form);
  }

  // -- user management ------------------------------------------------------

  showUsers(): void {
    this.guard(async () => {
      const page = await this.api.listUsers();
      this.renderUsers(page.users, page.total);
    });
  }

  private renderUsers(users: PublicUser[], total: number): void {
    const error = this.message("users-error", "", "error");
    const rows = users.map((user) => this.userRow(user, error));
    const table = el("table", { id: "users-table" }, [
      el("thead", {}, [
        el("tr", {}, [
          el("th", {}, ["Name"]),
          el("th", {}, ["CPF"]),
          el("th", {}, ["Email"]),
          el("th", {}, ["Anchored"]),
          el("th", {}, ["Actions"]),
        ]),
      ]),
      el("tbody", {}, rows),
    ]);
    this.render(
      "users",
      el("h1", {}, ["Users"]),
      this.message("users-total", `${total} registered`, "info"),
      error,
      table,
    );
  }

  private userRow(user: PublicUser, error: HTMLElement): HTMLElement {
    const name = el("input", {
      class: "edit-name",
      type: "text",
      value: user.name,
    });
    name.value = user.name;
    const email = el("input", {
      class: "edit-email",
      type: "email",
      value: user.email,
    });
    email.value = user.email;
    const save = el("button", { class: "save-user", type: "button" }, ["Save"]);
    save.addEventListener("click", () => {
      this.guard(async () => {
        try {
          await this.api.updateUser(user.user_id, {
            name: name.value,
            email: email.value,
          });
          this.showUsers();
        } catch (e) {
          if (e instanceof UnauthorizedError || !(e instanceof ApiError)) {
            throw e;
          }
          error.textContent = e.detail;
        }
      });
    });
    const remove = el("button", { class: "delete-user", type: "button" }, ["Delete"]);
    remove.addEventListener("click", () => {
      this.guard(async () => {
        await this.api.deleteUser(user.user_id);
        this.showUsers();
      });
    });
    return el("tr", { "data-user-id": user.user_id }, [
      el("td", {}, [name]),
      el("td", {}, [user.cpf]),
      el("td", {}, [email]),
      el("td", {}, [user.chain_tx_hash === null ? "pending" : "yes"]),
      el("td", {}, [save, remove]),
    ]);
  }

  // -- audit log ------------------------------------------------------------

  showAudit(): void {
    this.guard(async () => {
      const page = await this.api.listAudit();
      this.renderAudit(page.entries, page.total);
    });
  }

  private renderAudit(entries: AuditEntry[], total: number): void {
    const rows = entries.map((entry) =>
      el("tr", {}, [
        el("td", {}, [entry.timestamp]),
        el("td", {}, [entry.actor]),
        el("td", {}, [entry.action]),
        el("td", {}, [entry.resource_id ?? ""]),
        el("td", {}, [entry.outcome]),
        el("td", {}, [entry.detail ?? ""]),
      ]),
    );
    const table = el("table", { id: "audit-table" }, [
      el("thead", {}, [
        el("tr", {}, [
          el("th", {}, ["Timestamp"]),
          el("th", {}, ["Actor"]),
          el("th", {}, ["Action"]),
          el("th", {}, ["Resource"]),
          el("th", {}, ["Outcome"]),
          el("th", {}, ["Detail"]),
        ]),
      ]),
      el("tbody", {}, rows),
    ]);
    this.render(
      "audit",
      el("h1", {}, ["Audit log"]),
      this.message("audit-total", `${total} entries, newest first`, "info"),
      table,
    );
  }

  // -- session --------------------------------------------------------------

  logout(): void {
    this.track(
      this.api
        .logout()
        .catch(() => undefined) // token is dropped locally either way
        .then(() => this.showLogin("You have been signed out.")),
    );
  }
}

export function mount(root: HTMLElement, baseUrl = ""): App {
  const app = new App(root, new ApiClient(baseUrl));
  app.start();
  return app;
}
