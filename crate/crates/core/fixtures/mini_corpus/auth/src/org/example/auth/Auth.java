package org.example.auth;

import org.example.auth.token.Token;
import org.example.auth.token.TokenStore;

public class Auth {
    private final TokenStore store;
    private final UserService users;

    public Auth(TokenStore store, UserService users) {
        this.store = store;
        this.users = users;
    }

    public Token login(String username, String password) {
        User user = users.lookup(username);
        if (user == null || !user.checkPassword(password)) {
            throw new SecurityException("bad credentials for " + username);
        }
        return store.issue(user.getName());
    }

    public boolean verify(String tokenValue) {
        return store.isValid(tokenValue);
    }
}
