package org.example.auth.token;

public class Token {
    private final String value;
    private final long expiresAt;

    public Token(String value, long expiresAt) {
        this.value = value;
        this.expiresAt = expiresAt;
    }

    public String getValue() {
        return value;
    }

    public boolean isExpired(long now) {
        return now >= expiresAt;
    }
}
