package org.example.auth.token;

import java.util.HashMap;
import java.util.Map;
import java.util.UUID;

public class TokenStore {
    private static final long TTL_MILLIS = 3600 * 1000L;
    private final Map<String, Token> tokens = new HashMap<>();

    public Token issue(String username) {
        String value = username + ":" + UUID.randomUUID();
        Token token = new Token(value, System.currentTimeMillis() + TTL_MILLIS);
        tokens.put(value, token);
        return token;
    }

    public boolean isValid(String value) {
        Token token = tokens.get(value);
        return token != null && !token.isExpired(System.currentTimeMillis());
    }
}
