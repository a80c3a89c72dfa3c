package org.example.auth;

import org.example.auth.token.*;

public class Session {
    private final User user;
    private final Token token;

    public Session(User user, Token token) {
        this.user = user;
        this.token = token;
    }

    public String describe() {
        String role = user.isAdmin() ? "admin" : "user";
        return user.getName() + " (" + role + ") // " + token.getValue();
    }
}
