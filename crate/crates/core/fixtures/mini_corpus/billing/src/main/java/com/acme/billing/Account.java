package com.acme.billing;

import com.acme.billing.util.Money;
import java.util.List;

/**
 * A customer account holding subscriptions.
 */
public class Account {
    private final String accountId;
    private String ownerName;
    private Money balance = Money.zero();

    public Account(String accountId, String ownerName) {
        this.accountId = accountId;
        this.ownerName = ownerName;
    }

    public String getAccountId() {
        return accountId;
    }

    // credit the account
    public void credit(Money amount) {
        balance = balance.plus(amount);
    }

    public Money getBalance() {
        return balance;
    }
}
